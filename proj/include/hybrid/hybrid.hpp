#pragma once

#include "hybrid/expr.hpp"
#include "hybrid/store.hpp"
#include "hybrid/ode.hpp"
#include "hybrid/program.hpp"
#include "hybrid/desugar.hpp"
#include "hybrid/parser.hpp"
#include "hybrid/printer.hpp"
#include "hybrid/entropy.hpp"
#include "hybrid/smallstep.hpp"
#include "hybrid/bigstep.hpp"
#include "hybrid/denotational.hpp"
#include "hybrid/montecarlo.hpp"
