// Command-line driver: parse, run, simulate, adequacy, agree.
#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "hybrid/hybrid.hpp"

using namespace hybrid;

namespace {

enum Exit { Ok = 0, Usage = 1, EvalErr = 2, NoFuel = 3, Io = 4, Explosion = 5, CheckFailed = 6 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write '" + path + "'");
}

ParsedProgram load(const std::string& path) {
  auto src = read_file(path);
  try {
    return parse_program(src);
  } catch (const ParseError& e) {
    throw UsageError(path + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) + ": " + e.message());
  }
}

double parse_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (...) {
    used = 0;
  }
  if (used != s.size() || !std::isfinite(v)) throw UsageError("invalid " + what + " '" + s + "'");
  return v;
}

FlowMethod parse_flow(const std::string& s) {
  if (s == "auto") return FlowMethod::automatic();
  if (s == "exact") return FlowMethod::exact();
  if (s.rfind("rk4", 0) == 0) {
    if (s == "rk4") return FlowMethod::rk4(1e-3);
    if (s.size() > 4 && s[3] == ':') {
      double h = parse_number(s.substr(4), "RK4 step");
      if (!(h > 0)) throw UsageError("RK4 step must be positive");
      return FlowMethod::rk4(h);
    }
  }
  throw UsageError("--flow expects auto, exact or rk4:STEP");
}

Store initial_store(const VarTable& vars, const std::vector<std::string>& inits) {
  Store s(vars.size());
  for (const auto& kv : inits) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--init expects x=V, got '" + kv + "'");
    auto name = kv.substr(0, eq);
    auto idx = vars.find(name);
    if (!idx) throw UsageError("--init: program has no variable '" + name + "'");
    s = s.update(*idx, parse_number(kv.substr(eq + 1), "initial value"));
  }
  return s;
}

std::string show_store(const Store& s, const VarTable& vars) {
  std::string out;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (i) out += ", ";
    out += vars.name(i) + " = " + format_real(s[i]);
  }
  return out;
}

nlohmann::json named_store(const Store& s, const VarTable& vars) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < vars.size(); ++i) j[vars.name(i)] = s[i];
  return j;
}

std::uint64_t pick_seed(const std::optional<std::uint64_t>& seed, const ProgramPtr& p) {
  if (seed) return *seed;
  if (count_samples(p) == 0) return 0;
  std::random_device rd;
  std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  std::cerr << "seed: " << s << "\n";
  return s;
}

std::vector<double> parse_times(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(item, "time"));
  if (out.empty()) throw UsageError("empty time list");
  return out;
}

TimeGrid parse_grid(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() != 3) throw UsageError("--grid expects START:END:STEP");
  try {
    return TimeGrid::uniform(parse_number(parts[0], "grid start"), parse_number(parts[1], "grid end"),
                             parse_number(parts[2], "grid step"));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

// ---- parse

struct ParseOpts {
  std::string file;
  bool json = false;
};

nlohmann::json expr_json(const ExprPtr& e, const VarTable& vars) {
  if (const auto* c = std::get_if<Const>(&e->node)) return {{"const", c->value}};
  if (const auto* v = std::get_if<VarRef>(&e->node)) return {{"var", vars.name(v->index)}};
  const auto& ap = std::get<Apply>(e->node);
  static constexpr const char* ops[] = {"+", "-", "*", "/", "neg"};
  std::string name;
  if (static_cast<int>(ap.prim) <= static_cast<int>(Prim::Neg)) {
    name = ops[static_cast<int>(ap.prim)];
  } else {
    for (const auto& info : primitive_table)
      if (info.prim == ap.prim) name = std::string(info.name);
  }
  nlohmann::json args = nlohmann::json::array();
  for (const auto& a : ap.args) args.push_back(expr_json(a, vars));
  return {{"apply", name}, {"args", args}};
}

nlohmann::json bool_json(const BoolExprPtr& b, const VarTable& vars) {
  return std::visit(
      [&](const auto& n) -> nlohmann::json {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, BoolLit>)
          return {{"lit", n.value}};
        else if constexpr (std::is_same_v<T, Leq>)
          return {{"leq", {expr_json(n.lhs, vars), expr_json(n.rhs, vars)}}};
        else if constexpr (std::is_same_v<T, And>)
          return {{"and", {bool_json(n.lhs, vars), bool_json(n.rhs, vars)}}};
        else
          return {{"or", {bool_json(n.lhs, vars), bool_json(n.rhs, vars)}}};
      },
      b->node);
}

nlohmann::json program_json(const ProgramPtr& p, const VarTable& vars) {
  return std::visit(
      [&](const auto& n) -> nlohmann::json {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, DiffBlock>) {
          nlohmann::json d = nlohmann::json::object();
          for (const auto& [v, e] : n.listing) d[vars.name(v)] = expr_json(e, vars);
          return {{"diff", d}, {"duration", expr_json(n.duration, vars)}};
        } else if constexpr (std::is_same_v<T, Assign>) {
          return {{"assign", vars.name(n.var)}, {"value", expr_json(n.value, vars)}};
        } else if constexpr (std::is_same_v<T, Sample>) {
          return {{"sample", vars.name(n.var)}};
        } else if constexpr (std::is_same_v<T, Seq>) {
          return {{"seq", {program_json(n.first, vars), program_json(n.second, vars)}}};
        } else if constexpr (std::is_same_v<T, If>) {
          return {{"if", bool_json(n.cond, vars)},
                  {"then", program_json(n.then_branch, vars)},
                  {"else", program_json(n.else_branch, vars)}};
        } else {
          return {{"while", bool_json(n.cond, vars)}, {"body", program_json(n.body, vars)}};
        }
      },
      p->node);
}

int cmd_parse(const ParseOpts& o) {
  auto pp = load(o.file);
  if (o.json) {
    nlohmann::json j{{"variables", pp.vars.names()}, {"program", program_json(pp.program, pp.vars)}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << pretty_print(pp.program, pp.vars, true);
    std::cout << "variables:";
    for (const auto& n : pp.vars.names()) std::cout << " " << n;
    std::cout << "\n";
  }
  return Ok;
}

// ---- run

struct Common {
  std::string file;
  std::optional<std::uint64_t> seed;
  std::size_t fuel = default_fuel;
  std::string flow = "auto";
  std::vector<std::string> inits;
};

struct RunOpts : Common {
  double time = 0;
  bool trace = false;
  bool json = false;
};

int outcome_exit(const Outcome& o) {
  if (std::holds_alternative<Err>(o)) return EvalErr;
  if (std::holds_alternative<OutOfFuel>(o)) return NoFuel;
  return Ok;
}

int cmd_run(const RunOpts& o) {
  auto pp = load(o.file);
  auto method = parse_flow(o.flow);
  if (!(o.time >= 0)) throw UsageError("--time must be non-negative");
  if (o.fuel == 0) throw UsageError("--fuel must be positive");
  Config c{pp.program, initial_store(pp.vars, o.inits), o.time, from_seed(pick_seed(o.seed, pp.program))};

  Outcome outcome = Err{UndefReason::NonFinite};
  std::size_t steps = 0;
  if (o.trace) {
    auto tr = trace(c, o.fuel, method);
    for (std::size_t i = 0; i < tr.configs.size(); ++i) {
      const auto& k = tr.configs[i];
      nlohmann::json line{{"program", k.is_skip() ? "skip" : pretty_print(k.program, pp.vars)},
                          {"store", store_json(k.store)},
                          {"t", k.t},
                          {"entropy", k.entropy.position()}};
      if (i < tr.rules.size()) line["rule"] = to_string(tr.rules[i]);
      std::cout << line.dump() << "\n";
    }
    outcome = tr.outcome;
    steps = tr.rules.size();
  } else {
    auto r = run_to_terminal(c, o.fuel, method);
    outcome = r.outcome;
    steps = r.steps;
  }

  if (o.json) {
    auto j = outcome_json(outcome);
    if (const auto* ts = std::get_if<TimeStop>(&outcome)) j["values"] = named_store(ts->store, pp.vars);
    if (const auto* n = std::get_if<Normal>(&outcome)) j["values"] = named_store(n->store, pp.vars);
    j["steps"] = steps;
    std::cout << j.dump() << "\n";
  } else {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, TimeStop>)
            std::cout << "time-stop: " << show_store(x.store, pp.vars) << "\n";
          else if constexpr (std::is_same_v<T, Normal>)
            std::cout << "normal: " << show_store(x.store, pp.vars) << " (remaining time " << format_real(x.t)
                      << ", draws " << x.entropy.position() << ")\n";
          else if constexpr (std::is_same_v<T, Err>)
            std::cout << "err: " << to_string(x.reason) << "\n";
          else
            std::cout << "out-of-fuel: no terminal within " << x.steps << " steps\n";
        },
        outcome);
    std::cout << "steps: " << steps << "\n";
  }
  return outcome_exit(outcome);
}

// ---- simulate

struct SimulateOpts : Common {
  std::string grid;
  double end = 0, step = 0.1;
  std::size_t runs = 1;
  std::string out, format = "csv";
  std::string hist;
  std::size_t bins = 10;
  std::string check;
  std::vector<double> interval;
  std::size_t parallel = 1;
  bool canonical = false;
};

int cmd_simulate(const SimulateOpts& o) {
  auto pp = load(o.file);
  auto method = parse_flow(o.flow);
  if (o.runs == 0) throw UsageError("--runs must be at least 1");
  if (o.fuel == 0) throw UsageError("--fuel must be positive");
  if (o.format != "csv" && o.format != "json") throw UsageError("--format expects csv or json");
  std::optional<TimeGrid> grid;
  if (!o.grid.empty()) {
    grid = parse_grid(o.grid);
  } else if (o.end > 0) {
    try {
      grid = TimeGrid::uniform(0.0, o.end, o.step);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  } else {
    throw UsageError("simulate needs --grid START:END:STEP or --end E");
  }

  SimOptions sim{o.fuel, method, !o.canonical};
  auto ens = run_ensemble(pp.program, initial_store(pp.vars, o.inits), *grid, o.runs, pick_seed(o.seed, pp.program), sim,
                          std::max<std::size_t>(1, o.parallel));

  bool analysis = !o.hist.empty() || !o.check.empty();
  if (!o.out.empty() || !analysis) {
    write_output(o.out, o.format == "csv" ? to_csv(ens, pp.vars) : to_json(ens, pp.vars).dump(2) + "\n");
  }

  if (!o.check.empty()) {
    BoolExprPtr b;
    try {
      b = parse_bool_expr(o.check, pp.vars);
    } catch (const ParseError& e) {
      throw UsageError("--check: " + std::string(e.what()));
    }
    if (!o.interval.empty()) {
      if (o.interval.size() != 2) throw UsageError("--interval expects two times");
      IntervalProbability ip{};
      try {
        ip = interval_probability(ens, b, o.interval[0], o.interval[1]);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      std::cout << "interval,fraction,satisfied,runs,grid-points\n"
                << format_real(o.interval[0]) << ":" << format_real(o.interval[1]) << "," << format_real(ip.fraction)
                << "," << ip.satisfied << "," << ip.runs << "," << ip.grid_points << "\n"
                << "# " << ip.caveat << "\n";
    } else {
      std::cout << probability_csv(probability_over_time(ens, b));
    }
  }

  if (!o.hist.empty()) {
    auto at = o.hist.find('@');
    if (at == std::string::npos) throw UsageError("--hist expects VAR@T");
    auto var = pp.vars.find(o.hist.substr(0, at));
    if (!var) throw UsageError("--hist: program has no variable '" + o.hist.substr(0, at) + "'");
    Histogram h{};
    try {
      h = histogram(ens, *var, parse_number(o.hist.substr(at + 1), "histogram time"), o.bins);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    std::cout << histogram_csv(h) << "# excluded " << h.excluded << "\n";
  }
  return Ok;
}

// ---- adequacy

struct AdequacyOpts {
  std::string file;
  std::size_t k = 2, bound = 6, cap = default_branch_cap;
  std::string times;
  bool rational = false;
  std::string flow = "auto";
  std::vector<std::string> inits;
};

int cmd_adequacy(const AdequacyOpts& o) {
  auto pp = load(o.file);
  auto method = parse_flow(o.flow);
  if (o.k == 0) throw UsageError("--k must be positive");
  if (o.bound == 0) throw UsageError("--bound must be positive");
  std::vector<double> times =
      o.times.empty() ? std::vector<double>{0.0, 0.5, 1.5, 2.0 * std::numbers::sqrt3, 5.0} : parse_times(o.times);
  for (double t : times)
    if (!(t >= 0)) throw UsageError("times must be non-negative");
  auto sigma0 = initial_store(pp.vars, o.inits);
  Discretization d(o.k);
  nlohmann::json rep;
  try {
    rep = o.rational ? adequacy_report<Rational>(pp.program, pp.vars, sigma0, d, o.bound, times, o.cap, method)
                     : adequacy_report<double>(pp.program, pp.vars, sigma0, d, o.bound, times, o.cap, method);
  } catch (const BranchExplosion& e) {
    std::cout << nlohmann::json{{"error", "branch-explosion"}, {"cap", e.cap()}, {"live", e.live()}}.dump() << "\n";
    std::cerr << e.what() << "\n";
    return Explosion;
  }
  std::cout << rep.dump(2) << "\n";
  return rep["pass"].get<bool>() ? Ok : CheckFailed;
}

// ---- agree

struct AgreeOpts : Common {
  double time = 0;
};

int cmd_agree(const AgreeOpts& o) {
  auto pp = load(o.file);
  auto method = parse_flow(o.flow);
  if (o.fuel == 0) throw UsageError("--fuel must be positive");
  auto r = check_agreement(pp.program, initial_store(pp.vars, o.inits), o.time, from_seed(pick_seed(o.seed, pp.program)),
                           o.fuel, method);
  std::cout << to_json(r).dump(2) << "\n";
  return r.ok() ? Ok : CheckFailed;
}

template <class O>
void add_common(CLI::App* cmd, O& o) {
  cmd->add_option("file", o.file, "program source")->required();
  cmd->add_option("--seed", o.seed, "entropy seed (u64); random and reported on stderr when omitted");
  cmd->add_option("--fuel", o.fuel, "step budget")->capture_default_str();
  cmd->add_option("--flow", o.flow, "ODE flow: auto | exact | rk4:STEP")->capture_default_str();
  cmd->add_option("--init", o.inits, "initial value x=V (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpreter and semantics lab for a stochastic hybrid while-language"};
  app.require_subcommand(1);

  ParseOpts po;
  auto* parse = app.add_subcommand("parse", "print the desugared program and its variables");
  parse->add_option("file", po.file, "program source")->required();
  parse->add_flag("--json", po.json, "machine-readable AST");

  RunOpts ro;
  auto* run = app.add_subcommand("run", "evaluate at one time instant");
  add_common(run, ro);
  run->add_option("--time", ro.time, "query time")->required();
  run->add_flag("--trace", ro.trace, "print every configuration as a JSON line");
  run->add_flag("--json", ro.json, "print the terminal as JSON");

  SimulateOpts so;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo ensemble over a time grid");
  add_common(sim, so);
  sim->add_option("--grid", so.grid, "START:END:STEP");
  sim->add_option("--end", so.end, "grid 0:END with --step");
  sim->add_option("--step", so.step, "grid step for --end")->capture_default_str();
  sim->add_option("--runs", so.runs, "number of runs")->capture_default_str();
  sim->add_option("--out", so.out, "trajectory output file");
  sim->add_option("--format", so.format, "csv | json")->capture_default_str();
  sim->add_option("--hist", so.hist, "histogram of VAR at grid time T, as VAR@T");
  sim->add_option("--bins", so.bins, "histogram bins")->capture_default_str();
  sim->add_option("--check", so.check, "condition whose probability is reported");
  sim->add_option("--interval", so.interval, "report the probability that --check holds somewhere in [A,B]")
      ->expected(2);
  sim->add_option("--parallel", so.parallel, "worker threads")->capture_default_str();
  sim->add_flag("--canonical", so.canonical, "evaluate each grid time separately instead of in one pass");

  AdequacyOpts ao;
  auto* adq = app.add_subcommand("adequacy", "compare operational enumeration with the denotation");
  adq->add_option("file", ao.file, "program source")->required();
  adq->add_option("--k", ao.k, "atoms per sampling instruction")->capture_default_str();
  adq->add_option("--bound", ao.bound, "loop unfolding bound N")->capture_default_str();
  adq->add_option("--times", ao.times, "comma-separated query times (default 0,0.5,1.5,2sqrt3,5)");
  adq->add_option("--cap", ao.cap, "live branch cap")->capture_default_str();
  adq->add_flag("--rational", ao.rational, "exact rational weights");
  adq->add_option("--flow", ao.flow, "ODE flow: auto | exact | rk4:STEP")->capture_default_str();
  adq->add_option("--init", ao.inits, "initial value x=V (repeatable)");

  AgreeOpts go;
  auto* agr = app.add_subcommand("agree", "cross-check small-step, big-step and functional evaluation");
  add_common(agr, go);
  agr->add_option("--time", go.time, "query time")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? Ok : Usage;
  }

  try {
    if (*parse) return cmd_parse(po);
    if (*run) return cmd_run(ro);
    if (*sim) return cmd_simulate(so);
    if (*adq) return cmd_adequacy(ao);
    if (*agr) return cmd_agree(go);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Usage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Io;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Usage;
  }
  return Usage;
}
