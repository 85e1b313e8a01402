#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "riskq/constrained.hpp"

using namespace riskq;

namespace {

template <typename F>
auto batch(F f) {
  return [f](std::span<const Vector> xs) {
    std::vector<double> v;
    for (const Vector& x : xs)
      v.push_back(f(x));
    return v;
  };
}

MadsConfig budget(std::uint64_t evals, std::uint64_t seed = 0) {
  MadsConfig cfg;
  cfg.max_fun_evals = evals;
  cfg.seed = seed;
  return cfg;
}

} // namespace

TEST(Merit, Examples) {
  EXPECT_DOUBLE_EQ(merit(3.5, 1.0 - 0.25, 2.0, 0.25), 3.5);
  EXPECT_EQ(merit(0.0, 0.0, 1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(merit(2.0, -1.0, 0.5, 2.0), 2.0);
  EXPECT_NEAR(merit(2.0, std::exp(1.0) - 2.0, 0.5, 2.0), 1.0, 1e-15);
}

TEST(Merit, OutsideDomainIsInfinite) {
  EXPECT_EQ(merit(1.0, -1.0, 1.0, 1.0), kInfinity);
  EXPECT_EQ(merit(1.0, -2.0, 1.0, 1.0), kInfinity);
  EXPECT_EQ(merit(kInfinity, 0.0, 1.0, 1.0), kInfinity);
}

TEST(Constraint, Validation) {
  EXPECT_THROW((ConstraintFn{{0.5, 0.5}, 0.1, NormOrder::Inf}.validate()), ConfigError);
  EXPECT_THROW((ConstraintFn{{0.5, 0.5}, 0.0, NormOrder::L2}.validate()), ConfigError);
  const ConstraintFn c{{0.5, 0.5}, 0.2, NormOrder::L1};
  EXPECT_NEAR(c(Vector{0.5, 0.5}), -0.2, 1e-15);
  EXPECT_NEAR(c(Vector{0.6, 0.6}), 0.0, 1e-15);
}

TEST(Solver, InfeasibleStartRejected) {
  const ConstraintFn c{{0.5, 0.5}, 0.1, NormOrder::L2};
  auto obj = batch([](const Vector& x) { return x[0]; });
  EXPECT_THROW(minimize_constrained(obj, c, Vector{0.9, 0.9}, AugLagConfig{}, budget(1000)), StartError);
  EXPECT_THROW(minimize_constrained(obj, c, Vector{0.62, 0.5}, AugLagConfig{}, budget(1000)), StartError);
}

TEST(Solver, LinearObjectiveOverL1Ball) {
  const ConstraintFn c{{0.5, 0.5}, 0.3, NormOrder::L1};
  auto obj = batch([](const Vector& x) { return -x[0]; });
  const ConstrainedResult r = minimize_constrained(obj, c, c.center, AugLagConfig{}, budget(50000));
  ASSERT_TRUE(r.feasible);
  EXPECT_LE(r.fevals, 50000u);
  EXPECT_NEAR(r.x_end[0], 0.8, 1e-2);
  EXPECT_NEAR(r.x_end[1], 0.5, 1e-2);
}

TEST(Solver, ProjectionOntoL2Ball) {
  const ConstraintFn c{{0.5, 0.5}, 0.25, NormOrder::L2};
  auto obj = batch([](const Vector& x) {
    return (x[0] - 1.0) * (x[0] - 1.0) + (x[1] - 1.0) * (x[1] - 1.0);
  });
  const ConstrainedResult r = minimize_constrained(obj, c, c.center, AugLagConfig{}, budget(50000));
  ASSERT_TRUE(r.feasible);
  const double target = 0.5 + 0.25 / std::sqrt(2.0);
  EXPECT_NEAR(r.x_end[0], target, 1e-2);
  EXPECT_NEAR(r.x_end[1], target, 1e-2);
}

TEST(Solver, VacuousConstraintMatchesUnconstrained) {
  const ConstraintFn c{{0.5, 0.5}, 2.0, NormOrder::L2};
  auto f = [](const Vector& x) { return (x[0] - 0.3) * (x[0] - 0.3) + (x[1] - 0.8) * (x[1] - 0.8); };
  const ConstrainedResult con =
      minimize_constrained(batch(f), c, c.center, AugLagConfig{}, budget(5000));
  const MadsResult plain = minimize(batch(f), c.center, BoxBounds::unit(2), budget(5000));
  ASSERT_TRUE(con.feasible);
  EXPECT_NEAR(con.value, plain.value, AugLagConfig{}.tolerance);
}

TEST(Solver, ReportsBestInfeasibleWhenNothingFeasibleImproves) {
  // Objective is non-finite everywhere except the start, so the only feasible
  // value ever recorded is the start point's.
  const ConstraintFn c{{0.5, 0.5}, 0.1, NormOrder::L2};
  const Vector x0{0.5, 0.5};
  auto obj = batch([&](const Vector& x) { return x == x0 ? 1.0 : kInfinity; });
  const ConstrainedResult r = minimize_constrained(obj, c, x0, AugLagConfig{}, budget(2000));
  EXPECT_TRUE(r.feasible);
  EXPECT_EQ(r.x_end, x0);
}

// Properties -----------------------------------------------------------------

TEST(Properties, MeritDecreasesInConstraintValue) {
  std::mt19937_64 rng(30);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double q = 0.01 + u(rng);
    const double lambda = 0.01 + 10.0 * u(rng);
    const double w = 5.0 * (u(rng) - 0.5);
    const double c1 = -q + 1e-6 + 2.0 * u(rng);
    const double c2 = c1 + 1e-3 + u(rng);
    // log(q + c) grows with c, so the merit falls: larger constraint values
    // are cheaper under the barrier as written.
    ASSERT_GT(merit(w, c1, lambda, q), merit(w, c2, lambda, q));
  }
}

TEST(Properties, SolverBarrierKeepsSlackPositive) {
  // The solver applies the barrier to -c(x): points with c(x) >= q are
  // excluded and the merit grows toward the boundary from inside.
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double q = 0.01 + u(rng);
    const double c_inner = -u(rng);
    const double c_outer = c_inner + 0.5 * (q - c_inner) * u(rng) + 1e-9;
    ASSERT_LT(merit(1.0, -c_inner, 1.0, q), merit(1.0, -c_outer, 1.0, q));
    ASSERT_EQ(merit(1.0, -(q + 0.01), 1.0, q), kInfinity);
  }
}

TEST(Properties, ReturnedPointsAreFeasibleAndInBox) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 3;
    ConstraintFn c;
    c.p = rng() % 2 ? NormOrder::L1 : NormOrder::L2;
    c.radius = 0.05 + 0.4 * u(rng);
    for (std::size_t i = 0; i < n; ++i)
      c.center.push_back(u(rng));
    Vector target(n);
    for (double& v : target)
      v = u(rng);
    auto obj = batch([&](const Vector& x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        s += std::abs(x[i] - target[i]);
      return s;
    });
    AugLagConfig cfg;
    cfg.subproblem_evals = 60;
    const ConstrainedResult r = minimize_constrained(obj, c, c.center, cfg, budget(300, rng()));
    ASSERT_TRUE(r.feasible);
    ASSERT_LE(c(r.x_end), cfg.tolerance);
    ASSERT_TRUE(BoxBounds::unit(n).contains(r.x_end));
    ASSERT_LE(r.fevals, 300u);
    for (std::size_t k = 1; k < r.outer.size(); ++k) {
      ASSERT_GE(r.outer[k].lambda, r.outer[k - 1].lambda);
      if (!r.outer[k - 1].feasible) {
        ASSERT_GT(r.outer[k].lambda, r.outer[k - 1].lambda);
      }
      ASSERT_LT(r.outer[k].shift, r.outer[k - 1].shift);
    }
  }
}
