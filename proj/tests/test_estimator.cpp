#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "mwclust/common.hpp"
#include "mwclust/design.hpp"
#include "mwclust/estimator.hpp"
#include "mwclust/mechanisms.hpp"
#include "mwclust/population.hpp"
#include "mwclust/rng.hpp"

using namespace mwclust;
using Catch::Matchers::WithinAbs;

namespace {

Population four_cells(std::vector<double> y1, std::vector<double> y0) {
  std::vector<Unit> us;
  for (std::int32_t i = 0; i < 4; ++i) us.push_back({i, i, i, y1[i], y0[i]});
  return Population::from_units(us);
}

}  // namespace

TEST_CASE("difference in means on a four-unit draw") {
  const Population pop = four_cells({3.0, 0.0, 5.0, 0.0}, {0.0, 1.0, 0.0, 1.0});
  const std::vector<std::uint8_t> r = {1, 1, 1, 1};
  const std::vector<std::uint8_t> w = {1, 0, 1, 0};
  const Fit f = fit(pop, r, w);

  CHECK(f.tau_hat == 3.0);
  CHECK(f.alpha_hat == 1.0);
  CHECK(f.n == 4);
  CHECK(f.n_obs == 4);
  CHECK(f.n1 == 2);
  CHECK(f.n0 == 2);
  CHECK(f.b1_hat == 0.5);
  CHECK(f.b0_hat == 0.5);
  REQUIRE(f.observed == std::vector<std::int64_t>{0, 1, 2, 3});
  REQUIRE(f.eta_hat.size() == 4);
  CHECK(f.eta_hat[0] == -2.0);
  CHECK(f.eta_hat[1] == 0.0);
  CHECK(f.eta_hat[2] == 2.0);
  CHECK(f.eta_hat[3] == 0.0);
}

TEST_CASE("fits with one empty arm are rejected") {
  const Population pop = four_cells({1, 1, 1, 1}, {0, 0, 0, 0});
  CHECK_THROWS_AS(fit(pop, {1, 1, 1, 1}, {1, 1, 1, 1}), DegenerateDrawError);
  CHECK_THROWS_AS(fit(pop, {1, 1, 1, 1}, {0, 0, 0, 0}), DegenerateDrawError);
  CHECK_THROWS_AS(fit(pop, {0, 0, 0, 0}, {1, 0, 1, 0}), DegenerateDrawError);
  CHECK_THROWS_AS(fit(pop, {1, 1, 0, 0}, {1, 1, 0, 0}), DegenerateDrawError);
  CHECK_THROWS_AS(fit(pop, {1, 0, 1}, {1, 0, 1, 0}), ArgumentError);
}

TEST_CASE("arm shares are relative to the whole population, not the sample") {
  const Population pop = assign_effects(build_balanced(2, 3, 1), EffectScheme{EffectVariant::Same}, 2);
  const std::vector<std::uint8_t> r = {1, 1, 0, 0, 1, 1};
  const std::vector<std::uint8_t> w = {1, 0, 1, 0, 1, 0};
  const Fit f = fit(pop, r, w);
  CHECK(f.n_obs == 4);
  CHECK(f.n1 == 2);
  CHECK(f.n0 == 2);
  CHECK(f.b1_hat == 2.0 / 6.0);
  CHECK(f.b0_hat == 2.0 / 6.0);
  REQUIRE(f.observed == std::vector<std::int64_t>{0, 1, 4, 5});
}

TEST_CASE("constant effects without noise are estimated exactly under full observation") {
  const Population pop =
      assign_effects(build_balanced(4, 4, 2), EffectScheme{EffectVariant::Constant, 0.0}, 3);
  RandomStream rs(10);
  const std::vector<std::uint8_t> r(pop.size(), 1);
  const auto w = draw_assignment(pop, AssignmentSpec::iid(0.5), rs);
  const Fit f = fit(pop, r, w);
  CHECK(f.tau_hat == 1.0);
  CHECK(f.alpha_hat == 0.0);
}

TEST_CASE("observed-arm residuals sum to zero through the influence values") {
  RandomStream rs(77);
  const Population pop = assign_effects(build_balanced(8, 8, 2), EffectScheme{EffectVariant::Gvar}, 6);
  const auto r = draw_sampling(pop, SamplingSpec::iid(0.7), rs);
  const auto w = draw_assignment(pop, AssignmentSpec::iid(0.4), rs);
  const Fit f = fit(pop, r, w);

  KahanSum treated, control;
  for (std::size_t k = 0; k < f.observed.size(); ++k) {
    if (w[f.observed[k]])
      treated.add(f.eta_hat[k] * f.b1_hat);  // recovers the raw residual
    else
      control.add(-f.eta_hat[k] * f.b0_hat);
  }
  const double slack = 1e-8 * static_cast<double>(f.n_obs);
  CHECK(std::abs(treated.value()) <= slack);
  CHECK(std::abs(control.value()) <= slack);
  // influence values are signed: positive residual means positive influence on
  // treated units and negative influence on controls
  for (std::size_t k = 0; k < f.observed.size(); ++k) {
    const std::int64_t i = f.observed[k];
    const double resid = w[i] ? pop.y1(i) - f.alpha_hat - f.tau_hat : pop.y0(i) - f.alpha_hat;
    const double expect = w[i] ? resid / f.b1_hat : -resid / f.b0_hat;
    REQUIRE_THAT(f.eta_hat[k], WithinAbs(expect, 1e-10 * std::max(1.0, std::abs(expect))));
  }
}

TEST_CASE("estimator is shift and scale equivariant") {
  const Population base = assign_effects(build_balanced(5, 5, 2), EffectScheme{EffectVariant::Hvar}, 8);
  RandomStream rs(3);
  const auto r = draw_sampling(base, SamplingSpec::iid(0.8), rs);
  const auto w = draw_assignment(base, AssignmentSpec::iid(0.5), rs);
  const Fit f0 = fit(base, r, w);

  const double shift = 17.25, scale = -3.5;
  std::vector<double> y1s, y0s, y1m, y0m;
  for (std::int64_t i = 0; i < base.size(); ++i) {
    y1s.push_back(base.y1(i) + shift);
    y0s.push_back(base.y0(i) + shift);
    y1m.push_back(base.y1(i) * scale);
    y0m.push_back(base.y0(i) * scale);
  }
  Population shifted = base, scaled = base;
  shifted.set_outcomes(y1s, y0s);
  scaled.set_outcomes(y1m, y0m);

  const Fit fs = fit(shifted, r, w);
  const Fit fm = fit(scaled, r, w);
  CHECK_THAT(fs.tau_hat, WithinAbs(f0.tau_hat, 1e-12));
  CHECK_THAT(fs.alpha_hat, WithinAbs(f0.alpha_hat + shift, 1e-12));
  CHECK_THAT(fm.tau_hat, WithinAbs(f0.tau_hat * scale, 1e-12));
  for (std::size_t k = 0; k < f0.eta_hat.size(); ++k) {
    CHECK_THAT(fs.eta_hat[k], WithinAbs(f0.eta_hat[k], 1e-9));
    CHECK_THAT(fm.eta_hat[k], WithinAbs(f0.eta_hat[k] * scale, 1e-9));
  }
}

TEST_CASE("population influence means are the effect deviations") {
  const Population pop = Population::from_units({{0, 0, 0, 2.0, 0.0}, {1, 1, 1, 0.0, 0.0}});
  REQUIRE(pop.tau() == 1.0);
  const std::vector<double> e = eta_moments_population(pop);
  CHECK(e[0] == 1.0);   // unit effect 2 in a population with average effect 1
  CHECK(e[1] == -1.0);
  const Population flat =
      assign_effects(build_balanced(3, 3, 1), EffectScheme{EffectVariant::Constant}, 4);
  for (double ei : eta_moments_population(flat)) CHECK_THAT(ei, WithinAbs(0.0, 1e-12));
}

TEST_CASE("estimator is unbiased under every stock mechanism pair") {
  const Population pop =
      assign_effects(build_balanced(10, 10, 1), EffectScheme{EffectVariant::Same}, 5);
  const double tau = pop.tau();
  const double root_half = std::sqrt(0.5);
  struct MechPair {
    const char* label;
    SamplingSpec s;
    AssignmentSpec a;
  };
  const MechPair pairs[] = {
      {"full/and", SamplingSpec::full(), AssignmentSpec::multiway_and(root_half, root_half)},
      {"and/iid", SamplingSpec::multiway_and(0.25, 0.25, 0.25), AssignmentSpec::iid(0.5)},
      {"onewayG/onewayH", SamplingSpec::oneway_g(0.05, 1.0),
       AssignmentSpec::oneway_h(AssignDist::uniform01())},
      {"onewayG/iid", SamplingSpec::oneway_g(0.1, 1.0), AssignmentSpec::iid(0.5)},
      {"full/onewayH", SamplingSpec::full(), AssignmentSpec::oneway_h(AssignDist::uniform01())},
  };

  const std::int64_t reps = 100000;
  std::uint64_t tag = 0;
  for (const MechPair& mp : pairs) {
    RandomStream rs(derive_stream_seed(90, ++tag));
    std::vector<std::uint8_t> r, w;
    Fit f;
    std::vector<double> taus;
    for (std::int64_t t = 0; t < reps; ++t) {
      draw_sampling_into(pop, mp.s, rs, r);
      draw_assignment_into(pop, mp.a, rs, w);
      try {
        fit_into(pop, r, w, f);
        taus.push_back(f.tau_hat);
      } catch (const DegenerateDrawError&) {
      }
    }
    INFO(mp.label << ": " << taus.size() << " usable draws of " << reps);
    REQUIRE(taus.size() >= 1000);
    const SampleMoments m = sample_moments(taus);
    const double se = std::sqrt(m.variance / static_cast<double>(m.count));
    INFO("mean " << m.mean << " target " << tau << " se " << se);
    CHECK(std::abs(m.mean - tau) <= 4.0 * se);
  }
}
