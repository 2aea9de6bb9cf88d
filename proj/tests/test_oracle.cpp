#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "mwclust/checks.hpp"
#include "mwclust/estimator.hpp"
#include "mwclust/mechanisms.hpp"
#include "mwclust/oracle.hpp"
#include "mwclust/population.hpp"
#include "mwclust/variance.hpp"

using namespace mwclust;
using Catch::Matchers::WithinAbs;

TEST_CASE("pairwise reference matches a hand expansion for two unrelated units") {
  const Population pop = Population::from_units({{0, 0, 0, 3.0, 1.0}, {1, 1, 1, 1.0, 0.0}});
  // tau = 1.5, alpha = 0.5 => u1 = (1, -1), u0 = (0.5, -0.5)
  REQUIRE(pop.tau() == 1.5);
  REQUIRE(pop.alpha() == 0.5);

  // Full sampling with unit-level assignment at 1/2: cross-pair coefficients
  // vanish and each diagonal covariance term is (u1 + u0)^2, so
  //   v     = (1/2) * (1.5^2 + 1.5^2) = 2.25.
  // The ehw limit adds the per-unit effect heterogeneity (u1 - u0)^2 on top:
  //   v_ehw = 2.25 + (1/2) * (0.5^2 + 0.5^2) = 2.5.
  const SamplingSpec s = SamplingSpec::full();
  const AssignmentSpec a = AssignmentSpec::iid(0.5);
  const PairwiseVariances ref = pairwise_variances(pop, s, a);
  CHECK_THAT(ref.v, WithinAbs(2.25, 1e-12));
  CHECK_THAT(ref.v_ehw, WithinAbs(2.5, 1e-12));
  CHECK_THAT(ref.gap_ehw, WithinAbs(0.25, 1e-12));
  CHECK_THAT(true_variance(pop, s, a), WithinAbs(2.25, 1e-12));
}

TEST_CASE("unit-level mechanisms reduce the reference to its diagonal") {
  const Population pop =
      assign_effects(build_balanced(5, 2, 1), EffectScheme{EffectVariant::Constant}, 31);
  REQUIRE(pop.size() == 10);
  const SamplingSpec s = SamplingSpec::full();
  const AssignmentSpec a = AssignmentSpec::iid(0.5);
  const PairwiseVariances ref = pairwise_variances(pop, s, a);
  const double tol = 1e-12 * std::max(1.0, std::abs(ref.v));
  CHECK(std::abs(ref.v - ref.v_ehw) <= tol);  // every off-diagonal coefficient is zero
  CHECK(std::abs(true_variance(pop, s, a) - ref.v) <= tol);
}

TEST_CASE("pairwise reference rejects populations beyond its quadratic budget") {
  const Population pop = build_balanced(5001, 1, 1);
  REQUIRE_THROWS_AS(pairwise_variances(pop, SamplingSpec::full(), AssignmentSpec::iid(0.5)),
                    SizeError);
}

TEST_CASE("pairwise reference requires both arms to be reachable") {
  const Population pop = build_balanced(2, 2, 1);
  REQUIRE_THROWS_AS(pairwise_variances(pop, SamplingSpec::full(), AssignmentSpec::iid(1.0)),
                    InvalidMechanismError);
}

TEST_CASE("cluster-sum engine agrees with the pairwise reference everywhere") {
  const CheckResult r = check_oracle_equivalence(60, 4711);
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("banded neighbor covariance constant is -1/2") {
  for (auto [m, m0] : std::vector<std::pair<std::int32_t, std::int64_t>>{
           {4, 1}, {6, 2}, {100, 25}}) {
    Population pop = build_staircase(m, m0);
    pop = assign_effects(pop, EffectScheme{EffectVariant::OddEven}, 7);
    INFO("m=" << m << " m0=" << m0);
    CHECK_THAT(staircase_constant(pop), WithinAbs(-0.5, 1e-9));
  }
}

TEST_CASE("banded neighbor covariance constant matches its explicit pair sum") {
  Population pop = build_staircase(4, 1);
  pop = assign_effects(pop, EffectScheme{EffectVariant::OddEven}, 13);
  const std::vector<double> e = eta_moments_population(pop);
  double nbr = 0.0;
  for (std::int64_t i = 0; i < pop.size(); ++i)
    for (std::int64_t j = 0; j < pop.size(); ++j)
      if (pop.g(i) == pop.g(j) || pop.h(i) == pop.h(j)) nbr += e[i] * e[j];
  std::int64_t m0 = pop.cell_counts()[0];
  for (std::int64_t c : pop.cell_counts())
    if (c > 0) m0 = std::min(m0, c);
  const double want = nbr / (static_cast<double>(pop.size()) * static_cast<double>(m0));
  CHECK_THAT(staircase_constant(pop), WithinAbs(want, 1e-12));
}

TEST_CASE("neighbor covariance constant vanishes for constant effects") {
  Population pop = build_staircase(4, 2);
  pop = assign_effects(pop, EffectScheme{EffectVariant::Constant}, 5);
  CHECK_THAT(staircase_constant(pop), WithinAbs(0.0, 1e-12));
}

TEST_CASE("staircase grid sweep keeps the constant pinned") {
  const CheckResult r = check_staircase_grid();
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("single-relation moment checks expose the pinned probabilities") {
  const MomentCheck g = mc_moment_check(SamplingSpec::oneway_g(0.05, 1.0), PairRelation::SameGOnly,
                                        200000, 41);
  CHECK(g.expected == 0.05);
  CHECK(g.ok);
  const MomentCheck u = mc_moment_check(SamplingSpec::oneway_g(0.05, 1.0), PairRelation::Unrelated,
                                        200000, 41);
  CHECK_THAT(u.expected, WithinAbs(0.0025, 1e-17));  // fl(0.05^2) is an ulp off
  CHECK(u.ok);

  const AssignmentSpec oneway = AssignmentSpec::oneway_h(AssignDist::uniform01());
  const MomentCheck tt =
      mc_moment_check(oneway, PairRelation::SameHOnly, Arm::Treated, Arm::Treated, 200000, 43);
  CHECK_THAT(tt.expected, WithinAbs(1.0 / 3.0, 1e-15));
  CHECK(tt.ok);
  const MomentCheck tu =
      mc_moment_check(oneway, PairRelation::SameHOnly, Arm::Treated, Arm::Untreated, 200000, 43);
  CHECK_THAT(tu.expected, WithinAbs(1.0 / 6.0, 1e-15));
  CHECK(tu.ok);

  const double r = std::sqrt(0.5);
  const MomentCheck cell = mc_moment_check(AssignmentSpec::multiway_and(r, r),
                                           PairRelation::SameIntersection, Arm::Treated,
                                           Arm::Treated, 200000, 44);
  CHECK_THAT(cell.expected, WithinAbs(0.5, 1e-15));
  CHECK(cell.ok);
}

TEST_CASE("degenerate moment checks require exact agreement") {
  // full sampling: probability one, zero binomial spread, zero deviation
  const MomentCheck full =
      mc_moment_check(SamplingSpec::full(), PairRelation::Unrelated, 1000, 3);
  CHECK(full.expected == 1.0);
  CHECK(full.observed == 1.0);
  CHECK(full.se == 0.0);
  CHECK(full.dev_se == 0.0);
  CHECK(full.ok);
  // a unit never sits in both arms at once
  const MomentCheck never = mc_moment_check(AssignmentSpec::iid(0.5), PairRelation::SameIntersection,
                                            Arm::Treated, Arm::Untreated, 1000, 3, true);
  CHECK(never.expected == 0.0);
  CHECK(never.observed == 0.0);
  CHECK(never.ok);
}

TEST_CASE("estimator-spread comparison matches its closed form") {
  const Population pop =
      assign_effects(build_balanced(8, 8, 2), EffectScheme{EffectVariant::Constant}, 21);
  const EstimatorVarianceReport rep =
      mc_estimator_variance(pop, SamplingSpec::full(), AssignmentSpec::iid(0.5), 4000, 99);
  INFO("ratio " << rep.ratio << " used " << rep.used);
  CHECK_FALSE(rep.failed);
  CHECK(rep.used == rep.reps);
  CHECK(rep.true_v > 0.0);
  CHECK(rep.ratio >= 0.85);
  CHECK(rep.ratio <= 1.15);
}

TEST_CASE("noise-free constant effects leave nothing to estimate") {
  const Population pop =
      assign_effects(build_balanced(6, 6, 1), EffectScheme{EffectVariant::Constant, 0.0}, 2);
  const EstimatorVarianceReport rep =
      mc_estimator_variance(pop, SamplingSpec::full(), AssignmentSpec::iid(0.5), 500, 11);
  CHECK_FALSE(rep.failed);
  CHECK(rep.true_v == 0.0);
  CHECK(rep.empirical_v == 0.0);  // every draw recovers the effect exactly
}

TEST_CASE("an always-treated mechanism degenerates every draw") {
  const Population pop = build_balanced(3, 3, 1);
  const EstimatorVarianceReport rep =
      mc_estimator_variance(pop, SamplingSpec::full(), AssignmentSpec::iid(1.0), 250, 17);
  CHECK(rep.failed);
  CHECK(rep.degenerate == 250);
  CHECK(rep.used == 0);
}

TEST_CASE("overwhelmingly degenerate draws are reported as failure") {
  const Population pop = build_balanced(2, 2, 1);
  const EstimatorVarianceReport rep =
      mc_estimator_variance(pop, SamplingSpec::iid(0.05), AssignmentSpec::iid(0.5), 400, 23);
  CHECK(rep.failed);
  CHECK(rep.used < 200);
  CHECK(rep.used + rep.degenerate == 400);
}
