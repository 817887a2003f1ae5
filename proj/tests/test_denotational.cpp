#include <gtest/gtest.h>

#include "support.hpp"

using namespace hybrid;

namespace {

const Discretization k2(2);

template <class W = double>
DiscMeasure<W> den(const std::string& src, std::vector<double> sigma, double t, std::size_t iters = 6,
                   const Discretization& d = k2) {
  auto pp = parse_program(src);
  return denote<W>(pp.program, d, iters)(Store(std::move(sigma)), t);
}

}  // namespace

TEST(Measure, DiracAndMass) {
  auto m = dirac(Point::x(Store(2), 1.5));
  EXPECT_EQ(m.mass(), 1.0);
  EXPECT_EQ(m.size(), 1u);
  EXPECT_THROW(Point::x(Store(1), -0.5), std::invalid_argument);
}

TEST(Measure, ZeroWeightsAreDropped) {
  DiscMeasure<double> m;
  m.add(Point::e(Store(1)), 0.0);
  EXPECT_TRUE(m.empty());
  m.add(Point::e(Store(1)), 0.25);
  m.add(Point::e(Store(1)), -0.25);
  EXPECT_TRUE(m.empty());
}

TEST(Kleisli, ExceptionsPassThrough) {
  auto k = fixtures::random_kernel(1, 1);
  auto e = dirac(Point::e(Store(std::vector<double>{7})));
  EXPECT_EQ(kleisli_extend(k)(e), e);
}

TEST(Kleisli, LinearOnTwoPoints) {
  auto k = fixtures::random_kernel(2, 1);
  Point a = Point::x(Store(std::vector<double>{1}), 0), b = Point::x(Store(std::vector<double>{2}), 1);
  DiscMeasure<double> mu;
  mu.add(a, 0.5);
  mu.add(b, 0.5);
  auto expect = 0.5 * k(a.store, a.t) + 0.5 * k(b.store, b.t);
  EXPECT_LE(tv_distance(extend(mu, k), expect), 1e-15);
}

TEST(Kleisli, StopExampleFinalStep) {
  auto pp = parse_program("x := 0 ; while tt { x++ ; wait 1 }");
  auto two = dirac(Point::e(Store(std::vector<double>{2})));
  EXPECT_EQ(kleisli_extend(denote(pp.program, k2, 6))(two), two);
}

TEST(MonadLaws, RandomKernels) {
  std::mt19937_64 rng(11);
  for (std::uint64_t i = 0; i < 300; ++i) {
    auto k = fixtures::random_kernel(i, 2), h = fixtures::random_kernel(i + 1000, 2);
    auto mu = fixtures::random_measure(rng, 2);
    Kernel<double> unit = [](const Store& s, double t) { return dirac(Point::x(s, t)); };
    // left unit
    for (const auto& [p, w] : mu) {
      if (p.is_e())
        EXPECT_EQ(extend(dirac(p), k), dirac(p));
      else
        EXPECT_EQ(extend(dirac(p), k), k(p.store, p.t));
    }
    // right unit
    EXPECT_EQ(extend(mu, unit), mu);
    // associativity
    Kernel<double> kh = [&](const Store& s, double t) { return extend(k(s, t), h); };
    EXPECT_LE(tv_distance(extend(extend(mu, k), h), extend(mu, kh)), 1e-12);
  }
}

TEST(MonadLaws, LinearityAndContraction) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::uint64_t i = 0; i < 300; ++i) {
    auto k = fixtures::random_kernel(i, 2);
    auto mu = fixtures::random_measure(rng, 2), nu = fixtures::random_measure(rng, 2);
    double a = u(rng), b = u(rng);
    auto lhs = extend(a * mu + b * nu, k);
    auto rhs = a * extend(mu, k) + b * extend(nu, k);
    EXPECT_LE(tv_distance(lhs, rhs), 1e-12);
    EXPECT_LE(extend(mu, k).mass(), mu.mass() + 1e-12);
  }
}

TEST(MassSplit, Partitions) {
  Point x = Point::x(Store(1), 0), e = Point::e(Store(1));
  auto [pe, px] = mass_split(dirac(x));
  EXPECT_TRUE(pe.empty());
  EXPECT_EQ(px, dirac(x));
  DiscMeasure<double> mix;
  mix.add(e, 0.5);
  mix.add(x, 0.5);
  auto [me, mx] = mass_split(mix);
  EXPECT_EQ(me.mass(), 0.5);
  EXPECT_EQ(mx.mass(), 0.5);
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    auto mu = fixtures::random_measure(rng, 2);
    auto [a, b] = mass_split(mu);
    EXPECT_EQ(a + b, mu);
    for (const auto& [p, w] : a) EXPECT_TRUE(p.is_e());
    for (const auto& [p, w] : b) EXPECT_FALSE(p.is_e());
  }
}

TEST(TotalVariation, Basics) {
  std::mt19937_64 rng(14);
  auto a = dirac(Point::x(Store(std::vector<double>{0}), 0));
  auto b = dirac(Point::x(Store(std::vector<double>{1}), 0));
  EXPECT_EQ(tv_distance(a, a), 0.0);
  EXPECT_EQ(tv_distance(a, b), 2.0);
  EXPECT_EQ(tv_distance(a, dirac(Point::e(Store(std::vector<double>{0})))), 2.0);
  for (int i = 0; i < 200; ++i) {
    auto x = fixtures::random_measure(rng, 1), y = fixtures::random_measure(rng, 1), z = fixtures::random_measure(rng, 1);
    EXPECT_EQ(tv_distance(x, y), tv_distance(y, x));
    EXPECT_LE(tv_distance(x, z), tv_distance(x, y) + tv_distance(y, z) + 1e-15);
    EXPECT_EQ(tv_distance(x, x), 0.0);
  }
}

TEST(Discretization, MidpointAtoms) {
  EXPECT_EQ(Discretization(1).atoms(), std::vector<double>{0.5});
  EXPECT_EQ(Discretization(4).atoms(), (std::vector<double>{0.125, 0.375, 0.625, 0.875}));
  EXPECT_EQ(Discretization(3).weight<Rational>() * 3, Rational(1));
  EXPECT_THROW(Discretization(0), std::invalid_argument);
}

TEST(Denote, Sampling) {
  auto m = den("x := unif(0,1)", {0}, 1.5);
  DiscMeasure<double> expect;
  expect.add(Point::x(Store(std::vector<double>{0.25}), 1.5), 0.5);
  expect.add(Point::x(Store(std::vector<double>{0.75}), 1.5), 0.5);
  EXPECT_EQ(m, expect);
}

TEST(Denote, StopExample) {
  for (std::size_t iters : {2u, 3u, 6u})
    for (double v : {0.0, -3.0, 42.0}) {
      auto m = den<Rational>("x := 0 ; while tt { x++ ; wait 1 }", {v}, 1.5, iters);
      EXPECT_EQ(m, dirac<Rational>(Point::e(Store(std::vector<double>{2}))));
    }
  // one unfolding is not enough to reach the second wait
  EXPECT_TRUE(den("x := 0 ; while tt { x++ ; wait 1 }", {0}, 1.5, 1).empty());
}

TEST(Denote, UndefinedHasNoMass) {
  EXPECT_TRUE(den("x := 1/0", {0}, 1).empty());
  EXPECT_TRUE(den("if ln(x) <= 0 then x := 1 else x := 2", {0}, 1).empty());
  EXPECT_TRUE(den("x' = 1 for 0 - 1", {0}, 1).empty());
}

TEST(Denote, DiffCases) {
  auto stop = den("x' = 1 for 2", {0}, 0.5);
  EXPECT_EQ(stop, dirac(Point::e(Store(std::vector<double>{0.5}))));
  auto skip = den("x' = 1 for 2", {0}, 3);
  EXPECT_EQ(skip, dirac(Point::x(Store(std::vector<double>{2}), 1)));
}

TEST(Denote, KleeneMonotonicity) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    fixtures::Generator g(seed, 2);
    auto p = g.program(3);
    auto s = g.store();
    double t = g.time();
    DiscMeasure<Rational> prev;
    for (std::size_t i = 0; i <= 5; ++i) {
      auto cur = denote<Rational>(p, k2, i)(s, t);
      for (const auto& [pt, w] : prev) ASSERT_LE(w, cur.weight(pt)) << pretty_print(p, fixtures::names(2));
      ASSERT_LE(cur.mass(), Rational(1));
      prev = cur;
    }
  }
}

TEST(Enumerate, DeterministicIsDirac) {
  auto pp = parse_program("x := 3 ; y' = x for 1 ; x := x * y");
  Store s(pp.vars.size());
  auto op = enumerate_operational(pp.program, s, 4, k2, 6);
  auto fin = std::get<Normal>(run_to_terminal(Config{pp.program, s, 4, from_seed(0)}).outcome);
  EXPECT_EQ(op, dirac(Point::x(fin.store, fin.t)));
}

TEST(Enumerate, BernoulliSplitsEvenly) {
  auto pp = parse_program("bernoulli(1/2, x := 1, x := 2)");
  auto op = enumerate_operational<Rational>(pp.program, Store(2), 1, k2, 6);
  DiscMeasure<Rational> expect;
  expect.add(Point::x(Store(std::vector<double>{0.25, 1}), 1), Rational(1, 2));
  expect.add(Point::x(Store(std::vector<double>{0.75, 2}), 1), Rational(1, 2));
  EXPECT_EQ(op, expect);
}

TEST(Enumerate, StopExampleAnyK) {
  auto pp = parse_program("x := 0 ; while tt { x++ ; wait 1 }");
  for (std::size_t k : {1u, 2u, 3u, 5u})
    EXPECT_EQ(enumerate_operational<Rational>(pp.program, Store(1), 1.5, Discretization(k), 6),
              dirac<Rational>(Point::e(Store(std::vector<double>{2}))));
}

TEST(Enumerate, BranchCap) {
  auto pp = parse_program("while tt { x := unif(0,1) ; wait x }");
  EXPECT_THROW(enumerate_operational(pp.program, Store(1), 100, Discretization(4), 20, 1000), BranchExplosion);
}

TEST(Adequacy, ExamplesRational) {
  std::vector<double> times{0, 0.5, 1.5, 2 * std::sqrt(3.0), 5};
  for (const auto& e : fixtures::example_corpus())
    for (double t : times) {
      auto r = adequacy_check<Rational>(e.parsed.program, dirac<Rational>(Point::x(e.init, t)), k2, 6);
      EXPECT_EQ(r.tv, Rational(0)) << e.name << " t=" << t;
      EXPECT_TRUE(r.pass);
    }
}

TEST(Adequacy, ExamplesDouble) {
  for (const auto& e : fixtures::example_corpus()) {
    auto rep = adequacy_report<double>(e.parsed.program, e.parsed.vars, e.init, k2, 6, {0, 0.5, 1.5, 5});
    EXPECT_TRUE(rep["pass"].get<bool>()) << e.name;
    EXPECT_LE(rep["tv"].get<double>(), 1e-9);
    for (const char* key : {"program", "k", "N", "t-grid", "supports-sizes"}) EXPECT_TRUE(rep.contains(key));
  }
}

TEST(Adequacy, StraightLineIsExact) {
  auto pp = parse_program("x := 2 ; y := x * x ; p' = y for 0.5");
  auto r = adequacy_check<double>(pp.program, dirac(Point::x(Store(pp.vars.size()), 3)), k2, 6);
  EXPECT_EQ(r.tv, 0.0);
  EXPECT_EQ(r.operational.mass(), 1.0);
}

TEST(Adequacy, UndefinedGuardDeficientOnBothSides) {
  auto pp = parse_program("x := unif(0,1) ; if ln(x - 1/2) <= 0 then y := 1 else y := 2");
  auto r = adequacy_check<Rational>(pp.program, dirac<Rational>(Point::x(Store(2), 1)), k2, 6);
  EXPECT_EQ(r.tv, Rational(0));
  EXPECT_EQ(r.operational.mass(), Rational(1, 2));
  EXPECT_EQ(r.denotational.mass(), Rational(1, 2));
}

TEST(Adequacy, MixedInitialMeasure) {
  auto pp = parse_program("while x <= 2 { d := unif(0,1) ; wait d ; x++ }");
  DiscMeasure<Rational> mu;
  mu.add(Point::x(Store(std::vector<double>{0, 0}), 1), Rational(1, 3));
  mu.add(Point::x(Store(std::vector<double>{2, 0}), 0.5), Rational(1, 3));
  mu.add(Point::e(Store(std::vector<double>{9, 9})), Rational(1, 6));
  auto r = adequacy_check<Rational>(pp.program, mu, Discretization(3), 6);
  EXPECT_EQ(r.tv, Rational(0));
  EXPECT_EQ(r.operational.mass(), Rational(5, 6));
  EXPECT_EQ(r.denotational.weight(Point::e(Store(std::vector<double>{9, 9}))), Rational(1, 6));
}

TEST(Adequacy, RandomProgramsMatchedTruncation) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    fixtures::Generator g(seed, 2);
    auto p = g.program(3);
    auto s = g.store();
    double t = g.time();
    auto r = adequacy_check<Rational>(p, dirac<Rational>(Point::x(s, t)), k2, 4);
    ASSERT_EQ(r.tv, Rational(0)) << pretty_print(p, fixtures::names(2));
  }
}
