#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "mwclust/common.hpp"
#include "mwclust/design.hpp"
#include "mwclust/oracle.hpp"
#include "mwclust/population.hpp"
#include "mwclust/table.hpp"
#include "mwclust/variance.hpp"

namespace mwclust {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

inline std::string format_detail(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return buf;
}

inline std::int64_t pick_count(RandomStream& rs, std::int64_t lo, std::int64_t hi) {
  const double u = rs.uniform();
  const std::int64_t span = hi - lo + 1;
  std::int64_t v = lo + static_cast<std::int64_t>(u * static_cast<double>(span));
  if (v > hi) v = hi;
  return v;
}

inline double pick_real(RandomStream& rs, double lo, double hi) { return lo + (hi - lo) * rs.uniform(); }

}  // namespace detail

// Random small population with arbitrary cluster overlap and continuous
// outcomes; used by the property-test checks.
inline Population random_population(RandomStream& rs, std::int64_t max_units = 60,
                                    std::int32_t max_clusters = 6) {
  const std::int64_t n = detail::pick_count(rs, 2, max_units);
  const std::int32_t ng = static_cast<std::int32_t>(detail::pick_count(rs, 1, max_clusters));
  const std::int32_t nh = static_cast<std::int32_t>(detail::pick_count(rs, 1, max_clusters));
  std::vector<Unit> units(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    Unit& u = units[static_cast<std::size_t>(i)];
    u.id = i;
    u.g = static_cast<std::int32_t>(detail::pick_count(rs, 0, ng - 1));
    u.h = static_cast<std::int32_t>(detail::pick_count(rs, 0, nh - 1));
    u.y1 = rs.normal(1.0, 1.5);
    u.y0 = rs.normal(0.0, 1.0);
  }
  return Population::from_units(units);
}

// Mechanism fuzzers: parameters bounded away from 0/1 so both arms stay
// observable. `force_kind` cycles deterministically through the variants.
inline SamplingSpec random_sampling_spec(RandomStream& rs, int force_kind = -1) {
  const int kind = force_kind >= 0 ? force_kind % 4 : static_cast<int>(detail::pick_count(rs, 0, 3));
  switch (kind) {
    case 0: return SamplingSpec::full();
    case 1: return SamplingSpec::iid(detail::pick_real(rs, 0.3, 0.95));
    case 2:
      return SamplingSpec::oneway_g(detail::pick_real(rs, 0.3, 0.95), detail::pick_real(rs, 0.3, 0.95));
    default:
      return SamplingSpec::multiway_and(detail::pick_real(rs, 0.4, 0.95),
                                        detail::pick_real(rs, 0.4, 0.95),
                                        detail::pick_real(rs, 0.3, 0.95));
  }
}

inline AssignmentSpec random_assignment_spec(RandomStream& rs, int force_kind = -1) {
  const int kind = force_kind >= 0 ? force_kind % 3 : static_cast<int>(detail::pick_count(rs, 0, 2));
  switch (kind) {
    case 0: return AssignmentSpec::iid(detail::pick_real(rs, 0.25, 0.75));
    case 1:
      if (rs.bernoulli(0.5)) return AssignmentSpec::oneway_h(AssignDist::uniform01());
      return AssignmentSpec::oneway_h(AssignDist::two_point(detail::pick_real(rs, 0.1, 0.45),
                                                            detail::pick_real(rs, 0.55, 0.9),
                                                            detail::pick_real(rs, 0.2, 0.8)));
    default:
      return AssignmentSpec::multiway_and(detail::pick_real(rs, 0.45, 0.95),
                                          detail::pick_real(rs, 0.45, 0.95));
  }
}

// Closed-form cross moments vs Monte Carlo frequencies, all mechanisms.
inline CheckResult check_moment_suite(std::int64_t reps, std::uint64_t seed) {
  const std::vector<MomentCheck> checks = moment_suite(reps, seed);
  CheckResult r;
  r.name = "moment suite";
  r.pass = true;
  double worst = 0.0;
  std::string worst_name;
  int failed = 0;
  for (const MomentCheck& c : checks) {
    if (!c.ok) {
      ++failed;
      r.pass = false;
    }
    if (c.dev_se > worst) {
      worst = c.dev_se;
      worst_name = c.name;
    }
  }
  r.detail = detail::format_detail("%zu comparisons at %lld reps, %d failed, worst %.2f SE (%s)",
                                   checks.size(), static_cast<long long>(reps), failed, worst,
                                   worst_name.c_str());
  return r;
}

// Cluster-sum engine vs the O(n^2) pairwise oracle on randomized populations
// covering every mechanism variant.
inline CheckResult check_oracle_equivalence(std::int64_t trials, std::uint64_t seed) {
  CheckResult r;
  r.name = "oracle equivalence";
  r.pass = true;
  const auto t0 = std::chrono::steady_clock::now();
  RandomStream rs(seed);
  double worst = 0.0;
  for (std::int64_t t = 0; t < trials; ++t) {
    const Population pop = random_population(rs, 60);
    const SamplingSpec s = random_sampling_spec(rs, static_cast<int>(t % 4));
    const AssignmentSpec a = random_assignment_spec(rs, static_cast<int>(t / 4 % 3));
    const TheoreticalVariances th = limit_variances(pop, s, a);
    const PairwiseVariances po = pairwise_variances(pop, s, a);
    const double pairs[][2] = {{th.v, po.v},           {th.v_ehw, po.v_ehw},   {th.v_lzg, po.v_lzg},
                               {th.v_lzh, po.v_lzh},   {th.v_cgm, po.v_cgm},   {th.v_cgm2, po.v_cgm2},
                               {th.gap_ehw, po.gap_ehw}, {th.gap_lzg, po.gap_lzg},
                               {th.gap_cgm, po.gap_cgm}, {th.gap_cgm2, po.gap_cgm2}};
    for (const auto& p : pairs) {
      const double scaled = std::abs(p[0] - p[1]) / std::max(1.0, std::abs(p[1]));
      if (scaled > worst) worst = scaled;
    }
    if (std::abs(th.v - po.v) > 1e-10 * std::max(1.0, std::abs(po.v))) r.pass = false;
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (elapsed > 60.0) r.pass = false;
  r.detail = detail::format_detail("%lld populations, worst scaled deviation %.3e, %.2fs",
                                   static_cast<long long>(trials), worst, elapsed);
  return r;
}

// Wrapped staircase geometry: the neighbor covariance constant is -1/2 for
// every (m, m0) on the grid.
inline CheckResult check_staircase_grid() {
  CheckResult r;
  r.name = "staircase constant";
  r.pass = true;
  const std::int32_t ms[] = {4, 100, 1000};
  const std::int64_t m0s[] = {1, 3, 25, 250};
  double worst = 0.0;
  for (std::int32_t m : ms)
    for (std::int64_t m0 : m0s) {
      Population pop = build_staircase(m, m0);
      pop = assign_effects(pop, EffectScheme{EffectVariant::OddEven}, 7u);
      const double c = staircase_constant(pop);
      const double dev = std::abs(c + 0.5);
      if (dev > worst) worst = dev;
      if (dev > 1e-9) r.pass = false;
    }
  r.detail = detail::format_detail("12 geometries, worst |c + 1/2| = %.3e", worst);
  return r;
}

namespace detail {

inline Population fuzz_population(RandomStream& rs, int mode) {
  // mode 0: arbitrary overlap; 1: unique H labels; 2: unique G labels.
  const std::int64_t n = pick_count(rs, 2, 120);
  const std::int32_t nc = static_cast<std::int32_t>(pick_count(rs, 1, 8));
  std::vector<Unit> units(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    Unit& u = units[static_cast<std::size_t>(i)];
    u.id = i;
    const auto own = static_cast<std::int32_t>(i);
    const auto grp = static_cast<std::int32_t>(pick_count(rs, 0, nc - 1));
    const auto grp2 = static_cast<std::int32_t>(pick_count(rs, 0, nc - 1));
    u.g = mode == 2 ? own : grp;
    u.h = mode == 1 ? own : grp2;
    u.y1 = rs.normal(0.0, 1.0);
    u.y0 = rs.normal(0.0, 1.0);
  }
  return Population::from_units(units);
}

inline Fit fuzz_fit(RandomStream& rs, const Population& pop) {
  Fit f;
  f.n = pop.size();
  const double magnitude = std::pow(10.0, pick_real(rs, -3.0, 3.0));
  for (std::int64_t i = 0; i < pop.size(); ++i) {
    if (!rs.bernoulli(0.7)) continue;
    f.observed.push_back(i);
    f.eta_hat.push_back(rs.normal(0.0, magnitude));
  }
  if (f.observed.empty()) {
    f.observed.push_back(0);
    f.eta_hat.push_back(magnitude);
  }
  f.n_obs = static_cast<std::int64_t>(f.observed.size());
  return f;
}

}  // namespace detail

// Algebraic identities of the five estimators on fuzzed influence vectors,
// including the exact one-way-nesting reductions.
inline CheckResult check_identity_fuzz(std::int64_t vectors, std::uint64_t seed) {
  CheckResult r;
  r.name = "estimator identities";
  r.pass = true;
  RandomStream rs(seed);
  VarianceWorkspace ws;
  double worst_rel = 0.0;
  std::int64_t nesting_checked = 0;
  for (std::int64_t t = 0; t < vectors; ++t) {
    const int mode = static_cast<int>(t % 10 == 3) + 2 * static_cast<int>(t % 10 == 7);
    const Population pop = detail::fuzz_population(rs, mode);
    const Fit f = detail::fuzz_fit(rs, pop);
    const VarianceSet v = estimate_variances(f, pop, ws);

    if (v.ehw < 0 || v.lzg < 0 || v.lzh < 0 || v.lzm < 0 || v.cgm2 < 0 || v.cgm < 0) r.pass = false;

    const double ref = std::max({std::abs(v.lzg), std::abs(v.lzh), std::abs(v.lzm), 1e-300});
    const double raw = v.lzg + v.lzh - v.lzm;
    const double rel_cgm =
        v.cgm_clamped ? (raw <= 1e-12 * ref ? 0.0 : 1.0) : std::abs(v.cgm - raw) / ref;
    const double rel_cgm2 = std::abs(v.cgm2 - (v.lzg + v.lzh)) / ref;
    worst_rel = std::max({worst_rel, rel_cgm, rel_cgm2});
    if (rel_cgm > 1e-12 || rel_cgm2 > 1e-12) r.pass = false;

    if (mode == 1) {
      ++nesting_checked;
      if (v.lzh != v.ehw || v.lzm != v.ehw || (!v.cgm_clamped && v.cgm != v.lzg)) r.pass = false;
    } else if (mode == 2) {
      ++nesting_checked;
      // cgm = lzg + (lzh - lzm) collapses to lzh only up to one rounding here,
      // unlike the zero-difference collapse of mode 1.
      if (v.lzg != v.ehw || v.lzm != v.ehw ||
          (!v.cgm_clamped && std::abs(v.cgm - v.lzh) > 1e-14 * ref))
        r.pass = false;
    }
  }
  r.detail = detail::format_detail("%lld vectors, worst identity deviation %.3e, %lld nesting cases",
                                   static_cast<long long>(vectors), worst_rel,
                                   static_cast<long long>(nesting_checked));
  return r;
}

// cgm2's limit dominates the design variance on randomized configurations.
inline CheckResult check_dominance(std::int64_t configs, std::uint64_t seed) {
  CheckResult r;
  r.name = "cgm2 dominance";
  r.pass = true;
  RandomStream rs(seed);
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::int64_t t = 0; t < configs; ++t) {
    const Population pop = random_population(rs, 300, 10);
    const SamplingSpec s = random_sampling_spec(rs, static_cast<int>(t % 4));
    const AssignmentSpec a = random_assignment_spec(rs, static_cast<int>(t / 4 % 3));
    const TheoreticalVariances th = limit_variances(pop, s, a);
    if (th.gap_cgm2 < min_gap) min_gap = th.gap_cgm2;
    if (th.gap_cgm2 < -1e-12 * std::max(1.0, std::abs(th.v))) r.pass = false;
  }
  r.detail = detail::format_detail("%lld configurations, min(v_cgm2 - v) = %.3e",
                                   static_cast<long long>(configs), min_gap);
  return r;
}

// Estimator spread matches the design variance and looks normal.
inline CheckResult check_clt(std::uint64_t seed) {
  CheckResult r;
  r.name = "clt sanity";
  Population pop = build_balanced(50, 50, 1);
  pop = assign_effects(pop, EffectScheme{EffectVariant::Same}, derive_stream_seed(seed, 1));
  const EstimatorVarianceReport rep = mc_estimator_variance(
      pop, SamplingSpec::full(), AssignmentSpec::iid(0.5), 5000, derive_stream_seed(seed, 2));
  r.pass = !rep.failed && rep.ratio >= 0.9 && rep.ratio <= 1.1 && std::abs(rep.skewness) < 0.2 &&
           std::abs(rep.excess_kurtosis) < 0.5;
  r.detail = detail::format_detail(
      "variance ratio %.4f, skew %.3f, excess kurtosis %.3f, %lld/%lld usable draws", rep.ratio,
      rep.skewness, rep.excess_kurtosis, static_cast<long long>(rep.used),
      static_cast<long long>(rep.reps));
  return r;
}

// Identical CSV bytes for the same seed across worker counts.
inline CheckResult check_determinism(std::uint64_t seed) {
  CheckResult r;
  r.name = "worker determinism";
  Design d = find_design("D5");
  d.nsim = 300;
  const std::string one = render_csv({run_design(d, seed, 1)});
  const std::string two = render_csv({run_design(d, seed, 2)});
  const std::string five = render_csv({run_design(d, seed, 5)});
  r.pass = one == two && one == five;
  r.detail = detail::format_detail("csv bytes %s across worker counts {1,2,5} at nsim=%lld",
                                   r.pass ? "identical" : "DIFFER", static_cast<long long>(d.nsim));
  return r;
}

}  // namespace mwclust
