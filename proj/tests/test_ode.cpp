#include <gtest/gtest.h>

#include "support.hpp"

using namespace hybrid;

namespace {

OdeSystem system_of(const std::string& listing, const VarTable& vt) {
  auto pp = parse_program(listing + " for 1");
  const auto& d = std::get<DiffBlock>(pp.program->node);
  // re-index onto vt so tests can fix the variable order
  std::vector<ExprPtr> derivs(vt.size(), lit(0));
  for (const auto& [v, e] : d.listing) {
    auto text = pretty_print(*e, pp.vars);
    derivs[vt.at(pp.vars.name(v))] = parse_expr(text, vt);
  }
  return OdeSystem(derivs);
}

// Random x' = A x + c with the infinity norm of A at most `radius`.
OdeSystem random_affine(std::mt19937_64& rng, std::size_t n, double radius) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<std::vector<double>> a(n, std::vector<double>(n));
  double norm = 0;
  for (auto& row : a) {
    double sum = 0;
    for (auto& v : row) {
      v = u(rng);
      sum += std::abs(v);
    }
    norm = std::max(norm, sum);
  }
  std::vector<ExprPtr> derivs;
  for (std::size_t i = 0; i < n; ++i) {
    ExprPtr e = lit(u(rng));
    for (std::size_t j = 0; j < n; ++j) e = add(mul(lit(a[i][j] * radius / norm), var(j)), e);
    derivs.push_back(e);
  }
  return OdeSystem(derivs);
}

Store random_store(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-3, 3);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return Store(v);
}

double rel_err(const Store& a, const Store& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return worst;
}

}  // namespace

TEST(Classify, DoubleIntegrator) {
  VarTable vt({"p", "v"});
  auto f = classify_affine(system_of("p' = v, v' = 1", vt));
  ASSERT_TRUE(f);
  EXPECT_EQ(f->A, (std::vector<double>{0, 1, 0, 0}));
  EXPECT_EQ(f->c, (std::vector<double>{0, 1}));
}

TEST(Classify, ConstantFoldingAndScaling) {
  VarTable vt({"p", "v"});
  auto f = classify_affine(system_of("p' = 2 * (v - p) / 4 + sqrt(4), v' = -(p * 3)", vt));
  ASSERT_TRUE(f);
  EXPECT_EQ(f->A, (std::vector<double>{-0.5, 0.5, -3, 0}));
  EXPECT_EQ(f->c, (std::vector<double>{2, 0}));
}

TEST(Classify, HaltedAndNonAffine) {
  auto f = classify_affine(OdeSystem::halted(3));
  ASSERT_TRUE(f);
  EXPECT_EQ(f->A, std::vector<double>(9, 0.0));
  EXPECT_EQ(f->c, std::vector<double>(3, 0.0));
  VarTable vt({"v"});
  EXPECT_FALSE(classify_affine(system_of("v' = sin(v)", vt)));
  EXPECT_FALSE(classify_affine(system_of("v' = v * v", vt)));
  EXPECT_FALSE(classify_affine(system_of("v' = 1 / v", vt)));
}

TEST(Flow, DoubleIntegratorAtRootThree) {
  VarTable vt({"p", "v"});
  auto sys = system_of("p' = v, v' = 1", vt);
  double tau = std::sqrt(3.0);
  auto r = flow(sys, Store(std::vector<double>{0, 0}), tau, FlowMethod::exact());
  ASSERT_TRUE(r);
  EXPECT_NEAR((*r)[0], tau * tau / 2, 1e-15);
  EXPECT_NEAR((*r)[1], tau, 1e-15);
  EXPECT_NEAR((*r)[0], 1.5, 1e-12);
}

TEST(Flow, FallingBall) {
  VarTable vt({"p", "v"});
  auto sys = system_of("p' = v, v' = -9.8", vt);
  auto r = flow(sys, Store(std::vector<double>{10, 0}), 1.0, FlowMethod::exact());
  ASSERT_TRUE(r);
  EXPECT_NEAR((*r)[0], 5.1, 1e-12);
  EXPECT_NEAR((*r)[1], -9.8, 1e-12);
}

TEST(Flow, WaitIsIdentity) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    auto s = random_store(rng, 3);
    for (double tau : {0.0, 0.5, 7.0, 1e6}) {
      EXPECT_EQ(*flow(OdeSystem::halted(3), s, tau, FlowMethod::exact()), s);
      EXPECT_EQ(*flow(OdeSystem::halted(3), s, tau, FlowMethod::rk4(0.1)), s);
    }
  }
}

TEST(Flow, RotationAndGrowthAgainstClosedForm) {
  VarTable vt({"x", "y"});
  auto rot = system_of("x' = y, y' = -x", vt);
  auto grow = system_of("x' = x, y' = -2 * y", vt);
  for (double tau : {0.1, 1.0, 2.5, 10.0}) {
    auto r = flow(rot, Store(std::vector<double>{1, 0}), tau, FlowMethod::exact());
    EXPECT_NEAR((*r)[0], std::cos(tau), 1e-12);
    EXPECT_NEAR((*r)[1], -std::sin(tau), 1e-12);
    auto g = flow(grow, Store(std::vector<double>{1, 1}), tau, FlowMethod::exact());
    EXPECT_NEAR((*g)[0] / std::exp(tau), 1.0, 1e-12);
    EXPECT_NEAR((*g)[1], std::exp(-2 * tau), 1e-12);
  }
}

TEST(Flow, ZeroDurationIsExactIdentity) {
  std::mt19937_64 rng(2);
  VarTable vt({"v"});
  auto nonlin = system_of("v' = sin(v) + 1", vt);
  for (int i = 0; i < 100; ++i) {
    auto sys = random_affine(rng, 1 + i % 4, 2.0);
    auto s = random_store(rng, sys.size());
    EXPECT_EQ(*flow(sys, s, 0.0, FlowMethod::exact()), s);
    EXPECT_EQ(*flow(sys, s, 0.0, FlowMethod::rk4(1e-3)), s);
  }
  Store v(std::vector<double>{0.3});
  EXPECT_EQ(*flow(nonlin, v, 0.0, FlowMethod::rk4(0.1)), v);
}

TEST(Flow, SemigroupProperty) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 10);
  for (int i = 0; i < 500; ++i) {
    auto sys = random_affine(rng, 1 + i % 4, 0.5);
    auto s = random_store(rng, sys.size());
    double a = u(rng), b = u(rng);
    auto two = flow(sys, *flow(sys, s, a, FlowMethod::exact()), b, FlowMethod::exact());
    auto one = flow(sys, s, a + b, FlowMethod::exact());
    ASSERT_TRUE(two && one);
    EXPECT_LE(rel_err(*two, *one), 1e-9);
  }
}

TEST(Flow, Rk4MatchesExact) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 5);
  for (int i = 0; i < 40; ++i) {
    auto sys = random_affine(rng, 1 + i % 4, 2.0);
    auto s = random_store(rng, sys.size());
    double tau = u(rng);
    auto exact = flow(sys, s, tau, FlowMethod::exact());
    auto rk = flow(sys, s, tau, FlowMethod::rk4(1e-3));
    ASSERT_TRUE(exact && rk);
    EXPECT_LE(rel_err(*rk, *exact), 1e-6);
  }
}

TEST(Flow, MethodSelection) {
  VarTable vt({"v"});
  auto nonlin = system_of("v' = -v * v", vt);
  Store one(std::vector<double>{1.0});
  EXPECT_EQ(flow(nonlin, one, 1.0, FlowMethod::exact()).reason(), UndefReason::NonAffine);
  auto r = flow(nonlin, one, 1.0);  // automatic falls back to RK4
  ASSERT_TRUE(r);
  EXPECT_NEAR((*r)[0], 0.5, 1e-9);  // v = 1 / (1 + t)
}

TEST(Flow, UndefinedAlongTrajectory) {
  VarTable vt({"x"});
  auto sys = system_of("x' = ln(x)", vt);
  EXPECT_EQ(flow(sys, Store(std::vector<double>{-1.0}), 1.0, FlowMethod::rk4(0.1)).reason(), UndefReason::LnDomain);
  auto blow = system_of("x' = x * x", vt);  // x = 1 / (1 - t) escapes at t = 1
  EXPECT_FALSE(flow(blow, Store(std::vector<double>{1.0}), 2.0, FlowMethod::rk4(1e-2)));
}

TEST(Flow, NegativeDurationIsRejected) {
  EXPECT_THROW(flow(OdeSystem::halted(1), Store(1), -1.0), std::invalid_argument);
  EXPECT_THROW(FlowMethod::rk4(0.0), std::invalid_argument);
}

TEST(FlowSegment, MatchesFlowPointwise) {
  VarTable vt({"p", "v"});
  auto sys = system_of("p' = v, v' = -9.8", vt);
  Store s(std::vector<double>{10, 0});
  EXPECT_TRUE(flow_segment(sys, s, 2.0, {}).empty());
  auto at0 = flow_segment(sys, s, 2.0, {0.0});
  ASSERT_EQ(at0.size(), 1u);
  EXPECT_EQ(*at0[0].second, s);
  auto seg = flow_segment(sys, s, 2.0, {0.0, 1.0, 2.0}, FlowMethod::exact());
  ASSERT_EQ(seg.size(), 3u);
  for (const auto& [t, r] : seg) {
    EXPECT_EQ(*r, *flow(sys, s, t, FlowMethod::exact()));
    EXPECT_NEAR((*r)[0], 10 - 4.9 * t * t, 1e-12);
  }
  EXPECT_THROW(flow_segment(sys, s, 1.0, {0.5, 2.0}), std::invalid_argument);
  EXPECT_THROW(flow_segment(sys, s, 1.0, {0.5, 0.2}), std::invalid_argument);
}
