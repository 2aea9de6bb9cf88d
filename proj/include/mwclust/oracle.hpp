#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mwclust/common.hpp"
#include "mwclust/estimator.hpp"
#include "mwclust/mechanisms.hpp"
#include "mwclust/population.hpp"
#include "mwclust/rng.hpp"
#include "mwclust/variance.hpp"

namespace mwclust {

// Reference values computed by brute force over every ordered unit pair.
// Deliberately shares no aggregation code with the production path: moments
// come straight from the mechanism primitives and pairs are classified one at
// a time, so agreement validates the cluster-sum shortcuts.
struct PairwiseVariances {
  double v = 0.0;
  double v_ehw = 0.0;
  double v_lzg = 0.0;
  double v_lzh = 0.0;
  double v_cgm = 0.0;
  double v_cgm2 = 0.0;
  double gap_ehw = 0.0;
  double gap_lzg = 0.0;
  double gap_cgm = 0.0;
  double gap_cgm2 = 0.0;
};

inline constexpr std::int64_t kMaxPairwiseUnits = 5000;

inline PairwiseVariances pairwise_variances(const Population& pop, const SamplingSpec& s,
                                            const AssignmentSpec& a) {
  if (pop.size() > kMaxPairwiseUnits)
    throw SizeError("pairwise_variances is quadratic; population too large");
  s.validate();
  a.validate();
  const double b1 = prob_treated_observed(s, a);
  const double b0 = prob_control_observed(s, a);
  if (b1 <= 0.0 || b0 <= 0.0)
    throw InvalidMechanismError("mechanism leaves an arm with zero observation probability");

  const std::int64_t n = pop.size();
  double sum_xi_all = 0.0;
  double sum_eta_diag = 0.0, sum_eta_g = 0.0, sum_eta_h = 0.0, sum_eta_cell = 0.0;
  double sum_xi_nbr = 0.0;

  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      const bool diag = i == j;
      const PairRelation rel = relation_of(pop.g(i), pop.h(i), pop.g(j), pop.h(j));
      const double err = cross_moment_r(s, rel, diag);
      const double wtt = cross_moment_w(a, rel, diag, Arm::Treated, Arm::Treated);
      const double wtu = cross_moment_w(a, rel, diag, Arm::Treated, Arm::Untreated);
      const double wuu = cross_moment_w(a, rel, diag, Arm::Untreated, Arm::Untreated);
      // E[eta_i eta_j] from the definition of the influence terms.
      const double eta = err * wtt * pop.u1(i) * pop.u1(j) / (b1 * b1) +
                         err * wuu * pop.u0(i) * pop.u0(j) / (b0 * b0) -
                         err * wtu * (pop.u1(i) * pop.u0(j) + pop.u0(i) * pop.u1(j)) / (b1 * b0);
      const double e_i = pop.u1(i) - pop.u0(i);
      const double e_j = pop.u1(j) - pop.u0(j);
      const double xi = eta - e_i * e_j;

      sum_xi_all += xi;
      const bool same_g = pop.g(i) == pop.g(j);
      const bool same_h = pop.h(i) == pop.h(j);
      if (same_g || same_h) sum_xi_nbr += xi;
      if (diag) sum_eta_diag += eta;
      if (same_g) sum_eta_g += eta;
      if (same_h) sum_eta_h += eta;
      if (same_g && same_h) sum_eta_cell += eta;
    }
  }

  const double scale = (b1 + b0) / static_cast<double>(n);
  PairwiseVariances r;
  r.v = scale * sum_xi_all;  // unrelated pairs contribute exactly zero
  r.v_ehw = scale * sum_eta_diag;
  r.v_lzg = scale * sum_eta_g;
  r.v_lzh = scale * sum_eta_h;
  r.v_cgm = r.v_lzg + r.v_lzh - scale * sum_eta_cell;
  r.v_cgm2 = r.v_lzg + r.v_lzh;
  r.gap_ehw = r.v_ehw - r.v;
  r.gap_lzg = r.v_lzg - r.v;
  r.gap_cgm = r.v_cgm - r.v;
  r.gap_cgm2 = r.v_cgm2 - r.v;
  // Cross-check inside the oracle itself: neighbor-restricted and full sums
  // must agree because cross-cluster pairs are independent.
  const double slack = 1e-9 * std::max(1.0, std::abs(sum_xi_all));
  if (std::abs(sum_xi_all - sum_xi_nbr) > slack)
    throw Error("pairwise oracle: unrelated pairs carry unexpected covariance");
  return r;
}

// Scalar entry point: the brute-force value of the design variance alone.
inline double pairwise_variance(const Population& pop, const SamplingSpec& s, const AssignmentSpec& a) {
  return pairwise_variances(pop, s, a).v;
}

// Mean effect-deviation covariance among cluster neighbors, normalized by the
// smallest nonempty cell: (1/(n*m0)) * sum_i sum_{j: same g or h} e_i e_j.
// For the staircase geometry this is exactly -1/2 regardless of m and m0.
inline double staircase_constant(const Population& pop) {
  if (pop.size() == 0) throw DegeneratePopulationError("staircase_constant needs units");
  std::vector<double> sg(pop.num_g(), 0.0), sh(pop.num_h(), 0.0), sm(pop.num_cells(), 0.0);
  for (std::int64_t i = 0; i < pop.size(); ++i) {
    const double e = pop.u1(i) - pop.u0(i);
    sg[pop.g(i)] += e;
    sh[pop.h(i)] += e;
    sm[pop.cell(i)] += e;
  }
  double pge = 0.0, phe = 0.0, pme = 0.0;
  for (double x : sg) pge += x * x;
  for (double x : sh) phe += x * x;
  for (double x : sm) pme += x * x;

  std::int64_t m0 = std::numeric_limits<std::int64_t>::max();
  for (std::int64_t c : pop.cell_counts())
    if (c > 0) m0 = std::min(m0, c);
  return (pge + phe - pme) / (static_cast<double>(pop.size()) * static_cast<double>(m0));
}

// One Monte Carlo comparison of a closed-form probability against its
// empirical frequency; ok means within `dev_se` standard errors (exactness
// required when the binomial standard error is zero).
struct MomentCheck {
  std::string name;
  double expected = 0.0;
  double observed = 0.0;
  double se = 0.0;
  double dev_se = 0.0;
  bool ok = false;
};

namespace detail {

inline MomentCheck make_moment_check(std::string name, double expected, double observed,
                                     std::int64_t reps, double max_se = 4.0) {
  MomentCheck c;
  c.name = std::move(name);
  c.expected = expected;
  c.observed = observed;
  c.se = std::sqrt(std::max(0.0, expected * (1.0 - expected)) / static_cast<double>(reps));
  const double dev = std::abs(observed - expected);
  if (c.se > 0.0) {
    c.dev_se = dev / c.se;
    c.ok = c.dev_se <= max_se;
  } else {
    c.dev_se = dev == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    c.ok = dev == 0.0;
  }
  return c;
}

}  // namespace detail

namespace detail {

// Five units realizing every pair class against unit 0: itself (diagonal), a
// cellmate, a G-mate, an H-mate, and an unrelated unit.
inline Population moment_miniature() {
  std::vector<Unit> us = {{0, 0, 0, 0.0, 0.0},
                          {1, 0, 0, 0.0, 0.0},
                          {2, 0, 1, 0.0, 0.0},
                          {3, 1, 0, 0.0, 0.0},
                          {4, 1, 1, 0.0, 0.0}};
  return Population::from_units(us);
}

inline constexpr int kNumPairClasses = 5;  // diag, same cell, same G, same H, unrelated
inline constexpr PairRelation kPairClassRel[kNumPairClasses] = {
    PairRelation::SameIntersection, PairRelation::SameIntersection, PairRelation::SameGOnly,
    PairRelation::SameHOnly, PairRelation::Unrelated};
inline constexpr bool kPairClassDiag[kNumPairClasses] = {true, false, false, false, false};
inline constexpr const char* kPairClassName[kNumPairClasses] = {"diag", "sameCell", "sameG", "sameH",
                                                                "unrel"};

}  // namespace detail

// Empirical validation of every pair cross-moment; partner unit k realizes
// pair class k against unit 0.
inline std::vector<MomentCheck> moment_checks_sampling(const SamplingSpec& spec, std::string label,
                                                       std::int64_t reps, std::uint64_t seed) {
  Population pop = detail::moment_miniature();
  RandomStream rs(seed);
  std::vector<std::uint8_t> r;
  double cnt[detail::kNumPairClasses] = {};
  for (std::int64_t t = 0; t < reps; ++t) {
    draw_sampling_into(pop, spec, rs, r);
    for (int k = 0; k < detail::kNumPairClasses; ++k) cnt[k] += r[0] & r[k];
  }
  const double dr = static_cast<double>(reps);
  std::vector<MomentCheck> out;
  for (int k = 0; k < detail::kNumPairClasses; ++k) {
    const double expected = cross_moment_r(spec, detail::kPairClassRel[k], detail::kPairClassDiag[k]);
    out.push_back(detail::make_moment_check(label + " RR " + detail::kPairClassName[k], expected,
                                            cnt[k] / dr, reps));
  }
  return out;
}

inline std::vector<MomentCheck> moment_checks_assignment(const AssignmentSpec& spec, std::string label,
                                                         std::int64_t reps, std::uint64_t seed) {
  Population pop = detail::moment_miniature();
  RandomStream rs(seed);
  std::vector<std::uint8_t> w;
  // Counters indexed by [pair class][arm pattern 0=TT,1=TU,2=UU].
  double cnt[detail::kNumPairClasses][3] = {};
  for (std::int64_t t = 0; t < reps; ++t) {
    draw_assignment_into(pop, spec, rs, w);
    for (int k = 0; k < detail::kNumPairClasses; ++k) {
      cnt[k][0] += w[0] & w[k];
      cnt[k][1] += w[0] & (1 - w[k]);
      cnt[k][2] += (1 - w[0]) & (1 - w[k]);
    }
  }
  const double dr = static_cast<double>(reps);
  const Arm arms_i[3] = {Arm::Treated, Arm::Treated, Arm::Untreated};
  const Arm arms_j[3] = {Arm::Treated, Arm::Untreated, Arm::Untreated};
  const char* arm_names[3] = {"TT", "TU", "UU"};

  std::vector<MomentCheck> out;
  for (int k = 0; k < detail::kNumPairClasses; ++k) {
    for (int aidx = 0; aidx < 3; ++aidx) {
      const double expected = cross_moment_w(spec, detail::kPairClassRel[k], detail::kPairClassDiag[k],
                                             arms_i[aidx], arms_j[aidx]);
      out.push_back(detail::make_moment_check(
          label + " WW " + std::string(detail::kPairClassName[k]) + " " + arm_names[aidx], expected,
          cnt[k][aidx] / dr, reps));
    }
  }
  return out;
}

// Joint observation-probability checks for one mechanism pair.
inline std::vector<MomentCheck> moment_checks_joint(const SamplingSpec& s, const AssignmentSpec& a,
                                                    std::string label, std::int64_t reps,
                                                    std::uint64_t seed) {
  Population pop = build_balanced(2, 2, 1);
  RandomStream rs(seed);
  std::vector<std::uint8_t> r, w;
  double c1 = 0, c0 = 0;
  for (std::int64_t t = 0; t < reps; ++t) {
    draw_sampling_into(pop, s, rs, r);
    draw_assignment_into(pop, a, rs, w);
    c1 += r[0] & w[0];
    c0 += r[0] & (1 - w[0]);
  }
  const double dr = static_cast<double>(reps);
  std::vector<MomentCheck> out;
  out.push_back(detail::make_moment_check(label + " b1", prob_treated_observed(s, a), c1 / dr, reps));
  out.push_back(detail::make_moment_check(label + " b0", prob_control_observed(s, a), c0 / dr, reps));
  return out;
}

namespace detail {

inline int pair_class_index(PairRelation rel, bool diagonal) {
  switch (rel) {
    case PairRelation::SameIntersection: return diagonal ? 0 : 1;
    case PairRelation::SameGOnly: return 2;
    case PairRelation::SameHOnly: return 3;
    case PairRelation::Unrelated: return 4;
  }
  throw ArgumentError("bad pair relation");
}

}  // namespace detail

// Single-relation entry points; each runs the miniature simulation and picks
// out the requested comparison. SameIntersection means two distinct cellmates
// unless `diagonal` is set.
inline MomentCheck mc_moment_check(const SamplingSpec& spec, PairRelation rel, std::int64_t reps,
                                   std::uint64_t seed, bool diagonal = false) {
  const auto all = moment_checks_sampling(spec, "R", reps, seed);
  return all[static_cast<std::size_t>(detail::pair_class_index(rel, diagonal))];
}

inline MomentCheck mc_moment_check(const AssignmentSpec& spec, PairRelation rel, Arm arm_i, Arm arm_j,
                                   std::int64_t reps, std::uint64_t seed, bool diagonal = false) {
  const auto all = moment_checks_assignment(spec, "W", reps, seed);
  const int k = detail::pair_class_index(rel, diagonal);
  int aidx;
  if (arm_i == Arm::Treated && arm_j == Arm::Treated) aidx = 0;
  else if (arm_i == arm_j) aidx = 2;
  else aidx = 1;
  return all[static_cast<std::size_t>(3 * k + aidx)];
}

// Full battery over every mechanism kind with asymmetric parameter choices
// (symmetric values would mask transposed-formula bugs).
inline std::vector<MomentCheck> moment_suite(std::int64_t reps, std::uint64_t master_seed) {
  std::vector<MomentCheck> out;
  auto absorb = [&out](std::vector<MomentCheck> v) {
    for (auto& c : v) out.push_back(std::move(c));
  };
  std::uint64_t k = 0;
  auto seed = [&]() { return derive_stream_seed(master_seed, 1000 + k++); };

  absorb(moment_checks_sampling(SamplingSpec::full(), "R full", reps, seed()));
  absorb(moment_checks_sampling(SamplingSpec::iid(0.37), "R iid(0.37)", reps, seed()));
  absorb(moment_checks_sampling(SamplingSpec::oneway_g(0.3, 0.6), "R onewayG(0.3,0.6)", reps, seed()));
  absorb(moment_checks_sampling(SamplingSpec::multiway_and(0.5, 0.7, 0.8), "R and(0.5,0.7,0.8)", reps,
                                seed()));

  absorb(moment_checks_assignment(AssignmentSpec::iid(0.41), "W iid(0.41)", reps, seed()));
  absorb(moment_checks_assignment(AssignmentSpec::oneway_h(AssignDist::uniform01()), "W onewayH(U01)",
                                  reps, seed()));
  absorb(moment_checks_assignment(AssignmentSpec::oneway_h(AssignDist::two_point(0.2, 0.7, 0.3)),
                                  "W onewayH(2pt)", reps, seed()));
  absorb(moment_checks_assignment(AssignmentSpec::multiway_and(0.6, 0.45), "W and(0.6,0.45)", reps,
                                  seed()));

  absorb(moment_checks_joint(SamplingSpec::multiway_and(0.7, 0.7, 0.9),
                             AssignmentSpec::oneway_h(AssignDist::uniform01()), "joint and/onewayH",
                             reps, seed()));
  absorb(moment_checks_joint(SamplingSpec::oneway_g(0.25, 0.8), AssignmentSpec::iid(0.35),
                             "joint onewayG/iid", reps, seed()));
  return out;
}

// Monte Carlo check that the design variance formula matches the spread of
// the estimator under repeated draws.
struct EstimatorVarianceReport {
  std::int64_t reps = 0;
  std::int64_t used = 0;
  std::int64_t degenerate = 0;
  bool failed = false;  // mechanism degenerate or too few usable replications
  double true_v = 0.0;
  double empirical_v = 0.0;  // Var(tau_hat) * E[N]
  double ratio = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

inline EstimatorVarianceReport mc_estimator_variance(const Population& pop, const SamplingSpec& s,
                                                     const AssignmentSpec& a, std::int64_t reps,
                                                     std::uint64_t seed) {
  EstimatorVarianceReport rep;
  rep.reps = reps;
  const double b1 = prob_treated_observed(s, a);
  const double b0 = prob_control_observed(s, a);
  if (b1 <= 0.0 || b0 <= 0.0) {
    rep.failed = true;
    rep.degenerate = reps;  // every draw would lack one arm
    return rep;
  }
  rep.true_v = true_variance(pop, s, a);

  RandomStream rs(seed);
  std::vector<std::uint8_t> r, w;
  Fit fit;
  std::vector<double> taus;
  taus.reserve(static_cast<std::size_t>(reps));
  for (std::int64_t t = 0; t < reps; ++t) {
    draw_sampling_into(pop, s, rs, r);
    draw_assignment_into(pop, a, rs, w);
    try {
      fit_into(pop, r, w, fit);
      taus.push_back(fit.tau_hat);
    } catch (const DegenerateDrawError&) {
      ++rep.degenerate;
    }
  }
  rep.used = static_cast<std::int64_t>(taus.size());
  if (rep.used < reps / 2 || rep.used < 2) {
    rep.failed = true;
    return rep;
  }
  const SampleMoments m = sample_moments(taus);
  const double expected_n = static_cast<double>(pop.size()) * (b1 + b0);
  rep.empirical_v = m.variance * expected_n;
  rep.ratio = rep.true_v > 0.0 ? rep.empirical_v / rep.true_v : 0.0;
  rep.skewness = m.skewness;
  rep.excess_kurtosis = m.excess_kurtosis;
  return rep;
}

}  // namespace mwclust
