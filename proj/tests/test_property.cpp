#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "riskq/property.hpp"

using namespace riskq;

TEST(Label, ClearTopLabel) {
  const LabelDecision d = label(Vector{0.9, 0.05, 0.05}, 0.1);
  EXPECT_EQ(d.label, 1);
  EXPECT_NEAR(d.margin, 0.85, 1e-15);
}

TEST(Label, TieIsUndecided) {
  EXPECT_EQ(label(Vector{0.5, 0.5}, 0.0).label, 0);
  EXPECT_EQ(label(Vector{0.5, 0.5}, 0.3).label, 0);
  EXPECT_EQ(label(Vector{0.5, 0.5}, 0.0).margin, 0.0);
}

TEST(Label, StrictThreshold) {
  const Vector out{0.4, 0.35, 0.25};
  EXPECT_EQ(label(out, 0.04).label, 1);
  EXPECT_NEAR(label(out, 0.04).margin, 0.05, 1e-15);
  EXPECT_EQ(label(out, 0.05).label, 0);
  EXPECT_EQ(label(Vector{0.5, 0.25, 0.25}, 0.25).label, 0);
  EXPECT_EQ(label(Vector{0.5, 0.25, 0.25}, 0.2499).label, 1);
}

TEST(Label, Errors) {
  EXPECT_THROW(label(Vector{1.0}, 0.0), ConfigError);
  EXPECT_THROW(label(Vector{0.5, 0.5}, 1.0), ConfigError);
  EXPECT_THROW(label(Vector{0.5, 0.5}, -0.1), ConfigError);
}

TEST(ConfidenceInterval, Examples) {
  EXPECT_DOUBLE_EQ(eval_ci({1, 2, 0.0}, Vector{1.0, 0.0}), 1.0);
  EXPECT_NEAR(eval_ci({1, 2, 0.2}, Vector{0.6, 0.4}), 0.0, 1e-15);
  EXPECT_NEAR(eval_ci({1, 2, 0.0}, Vector{0.3, 0.7}), -0.4, 1e-15);
}

TEST(ConfidenceInterval, Cases) {
  const Vector out{0.1, 0.7, 0.2};
  const ConfidenceInterval c1 = make_ci_case(CiCase::Untargeted, out, 0.0);
  EXPECT_EQ(c1.l1, 2);
  EXPECT_EQ(c1.l2, 3);
  const ConfidenceInterval c3 = make_ci_case(CiCase::Extreme, out, 0.0);
  EXPECT_EQ(c3.l1, 2);
  EXPECT_EQ(c3.l2, 1);
  const ConfidenceInterval c2 = make_ci_case(CiCase::Targeted, out, 0.0, 1);
  EXPECT_EQ(c2.l1, 2);
  EXPECT_EQ(c2.l2, 1);
  EXPECT_THROW(make_ci_case(CiCase::Targeted, out, 0.0, 2), ConfigError);
  EXPECT_THROW(make_ci_case(CiCase::Targeted, out, 0.0), ConfigError);
  EXPECT_THROW(make_ci_case(CiCase::Targeted, out, 0.0, 4), ConfigError);
}

TEST(ConfidenceInterval, ExtremeCaseWithEqualOutputs) {
  const ConfidenceInterval c = make_ci_case(CiCase::Extreme, Vector{0.25, 0.25, 0.25, 0.25}, 0.0);
  EXPECT_NE(c.l1, c.l2);
}

TEST(Uncertainty, UniformGivesMinusEpsilon) {
  for (std::size_t m = 2; m <= 10; ++m) {
    const Vector out(m, 1.0 / static_cast<double>(m));
    EXPECT_NEAR(eval_uncertainty({0.1}, out), -0.1, 1e-15);
  }
}

TEST(Uncertainty, ConfidentOutputIsPositive) {
  EXPECT_GT(eval_uncertainty({0.0}, Vector{1.0 - kProbabilityFloor, kProbabilityFloor}), 0.0);
  EXPECT_TRUE(std::isfinite(eval_uncertainty({0.0}, Vector{1.0, 0.0})));
}

TEST(Uncertainty, ArithmeticOracle) {
  const double expected = (-std::log(2.1) - std::log(0.6) - std::log(0.3)) / 3.0;
  EXPECT_NEAR(eval_uncertainty({0.0}, Vector{0.7, 0.2, 0.1}), expected, 1e-12);
  // The four-figure value 0.3244 is this, rounded to within 2e-4.
  EXPECT_NEAR(expected, 0.3244, 2e-4);
}

TEST(Uncertainty, ReferenceForm) {
  EXPECT_NEAR(eval_uncertainty_ref({{0.3, 0.7}, 0.05}, Vector{0.3, 0.7}), -0.05, 1e-15);
  const double expected = -(std::log(1.6) + std::log(0.4)) / 2.0;
  EXPECT_NEAR(eval_uncertainty_ref({{0.5, 0.5}, 0.0}, Vector{0.8, 0.2}), expected, 1e-12);
  EXPECT_NEAR(expected, 0.2231, 1e-4);
  EXPECT_NEAR(eval_uncertainty_ref({{0.25, 0.25, 0.25, 0.25}, 0.0}, Vector(4, 0.25)), 0.0, 1e-15);
}

TEST(Reachability, Examples) {
  EXPECT_NEAR(eval_reachability({2, 0.5}, Vector{0.3, 0.7}), 0.2, 1e-15);
  EXPECT_NEAR(eval_reachability({1, 0.3}, Vector{0.3, 0.7}), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(eval_reachability({1, 1.0}, Vector{1.0, 0.0}), 0.0);
}

TEST(Validate, RejectsBadExpressions) {
  EXPECT_THROW(validate(ConfidenceInterval{1, 1, 0.0}, 3), ConfigError);
  EXPECT_THROW(validate(ConfidenceInterval{1, 4, 0.0}, 3), ConfigError);
  EXPECT_THROW(validate(ConfidenceInterval{1, 2, 1.5}, 3), ConfigError);
  EXPECT_THROW(validate(UncertaintyUniform{0.0}, 3), ConfigError);
  EXPECT_THROW(validate(UncertaintyReference{{0.5, 0.5, 0.0}, 0.1}, 3), ConfigError);
  EXPECT_THROW(validate(UncertaintyReference{{0.5, 0.4, 0.2}, 0.1}, 3), ConfigError);
  EXPECT_THROW(validate(Reachability{1, 1.0}, 3), ConfigError);
  EXPECT_THROW(validate(Reachability{0, 0.5}, 3), ConfigError);
  EXPECT_NO_THROW(validate(UncertaintyReference{{0.2, 0.3, 0.5}, 0.1}, 3));
}

TEST(Classify, PaperExamples) {
  const LabelDecision three{3, 3, 0.5, 0.0};
  const LabelDecision five{5, 5, 0.5, 0.0};
  const LabelDecision undecided{0, 2, 0.0, 0.0};
  EXPECT_EQ(classify_risk(three, undecided, 3, 3).category, RiskCategory::UncertaintyExample);
  EXPECT_EQ(classify_risk(three, five, 3, 3).category, RiskCategory::AdversarialExample);
  EXPECT_EQ(classify_risk(three, three, 3, 0).category, RiskCategory::AdversarialExample);
  EXPECT_EQ(classify_risk(three, three, 3, 5).category, RiskCategory::InvariantExample);
}

TEST(Classify, ContractViolations) {
  const LabelDecision undecided{0, 1, 0.0, 0.0};
  const LabelDecision one{1, 1, 0.5, 0.0};
  EXPECT_THROW(classify_risk(undecided, one, 0, 1), ContractError);
  EXPECT_THROW(classify_risk(one, one, 2, 1), ContractError);
}

// Properties -----------------------------------------------------------------

namespace {

Vector random_distribution(std::mt19937_64& rng, std::size_t m) {
  std::exponential_distribution<double> e(1.0);
  Vector p(m);
  for (double& v : p)
    v = e(rng);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p)
    v /= total;
  return p;
}

} // namespace

TEST(Properties, CiAntisymmetry) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 2 + rng() % 8;
    const Vector out = random_distribution(rng, m);
    const Label a = 1 + static_cast<Label>(rng() % m);
    Label b = 1 + static_cast<Label>(rng() % m);
    if (a == b)
      b = a % static_cast<Label>(m) + 1;
    ASSERT_EQ(eval_ci({a, b, 0.0}, out), -eval_ci({b, a, 0.0}, out));
  }
}

TEST(Properties, UncertaintyGibbsInequality) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 2 + rng() % 8;
    const double eps = 0.01 + 0.5 * static_cast<double>(rng() % 100) / 100.0;
    const Vector out = random_distribution(rng, m);
    ASSERT_GE(eval_uncertainty({eps}, out), -eps - 1e-12);
    const Vector uniform(m, 1.0 / static_cast<double>(m));
    ASSERT_NEAR(eval_uncertainty({eps}, uniform), -eps, 1e-12);
  }
}

TEST(Properties, LabelPermutationEquivariance) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 2 + rng() % 8;
    const Vector out = random_distribution(rng, m);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Vector permuted(m);
    for (std::size_t i = 0; i < m; ++i)
      permuted[perm[i]] = out[i];
    const double eps = 0.2 * static_cast<double>(rng() % 100) / 100.0;
    const LabelDecision a = label(out, eps);
    const LabelDecision b = label(permuted, eps);
    ASSERT_EQ(a.margin, b.margin);
    ASSERT_EQ(b.top, static_cast<Label>(perm[static_cast<std::size_t>(a.top - 1)] + 1));
    ASSERT_EQ(a.label == 0, b.label == 0);
    ASSERT_GE(a.margin, 0.0);
    ASSERT_LE(a.margin, 1.0);
  }
}

// Every label pattern over a small alphabet; the expected cell is written out
// from the table directly, row by row.
TEST(Properties, TableExhaustive) {
  auto expected = [](Label lx, Label lxh, Label ox, Label oxh) {
    if (lxh == 0)
      return oxh == 0 ? RiskCategory::NoError : RiskCategory::UncertaintyExample;
    if (lxh == lx) {
      if (oxh == 0)
        return RiskCategory::AdversarialExample;
      return oxh == ox ? RiskCategory::NoError : RiskCategory::InvariantExample;
    }
    if (oxh == 0 || oxh == ox)
      return RiskCategory::AdversarialExample;
    return RiskCategory::NoError;
  };
  std::size_t checked = 0;
  std::set<RiskCategory> seen;
  for (Label m = 2; m <= 8; ++m)
    for (Label lx = 1; lx <= m; ++lx)
      for (Label lxh = 0; lxh <= m; ++lxh)
        for (Label oxh = 0; oxh <= m; ++oxh) {
          const LabelDecision a{lx, lx, 0.5, 0.0};
          const LabelDecision b{lxh, lxh == 0 ? 1 : lxh, lxh == 0 ? 0.0 : 0.5, 0.0};
          const RiskClass r = classify_risk(a, b, lx, oxh);
          ASSERT_EQ(r.category, expected(lx, lxh, lx, oxh));
          ASSERT_EQ(r.network_labels, std::make_pair(lx, lxh));
          ASSERT_EQ(r.oracle_labels, std::make_pair(lx, oxh));
          seen.insert(r.category);
          ++checked;
        }
  EXPECT_EQ(checked, 1736u);
  EXPECT_EQ(seen.size(), 4u);
}

TEST(Properties, TableRandomLabelSets) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const Label m = 2 + static_cast<Label>(rng() % 20);
    const Label lx = 1 + static_cast<Label>(rng() % static_cast<std::uint64_t>(m));
    const Label lxh = static_cast<Label>(rng() % static_cast<std::uint64_t>(m + 1));
    const Label oxh = static_cast<Label>(rng() % static_cast<std::uint64_t>(m + 1));
    const int row = lxh == 0 ? 0 : (lxh == lx ? 1 : 2);
    const int col = oxh == 0 ? 0 : (oxh == lx ? 1 : 2);
    static const RiskCategory table[3][3] = {
        {RiskCategory::NoError, RiskCategory::UncertaintyExample, RiskCategory::UncertaintyExample},
        {RiskCategory::AdversarialExample, RiskCategory::NoError, RiskCategory::InvariantExample},
        {RiskCategory::AdversarialExample, RiskCategory::AdversarialExample, RiskCategory::NoError}};
    const RiskClass r = classify_risk({lx, lx, 0.5, 0.0}, {lxh, lxh, 0.5, 0.0}, lx, oxh);
    ASSERT_EQ(r.category, table[row][col]);
  }
}
