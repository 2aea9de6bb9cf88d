#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "mwclust/common.hpp"
#include "mwclust/estimator.hpp"
#include "mwclust/mechanisms.hpp"
#include "mwclust/population.hpp"

namespace mwclust {

// Feasible variance estimates on the scale that divides by the observed count
// to give the squared standard error of tau_hat (so ci = tau_hat ±
// z*sqrt(value/n_obs)). cgm is clamped at zero; the identity cgm = lzg + lzh
// - lzm refers to the unclamped value.
struct VarianceSet {
  double ehw = 0.0;
  double lzg = 0.0;
  double lzh = 0.0;
  double lzm = 0.0;
  double cgm = 0.0;
  double cgm2 = 0.0;
  bool cgm_clamped = false;
};

namespace detail {

// Sparse per-cluster accumulator with epoch stamps: resets in O(touched),
// reports touched clusters in first-touch order.
class GroupAccumulator {
 public:
  void begin(std::size_t groups) {
    if (sum_.size() < groups) {
      sum_.resize(groups, 0.0);
      stamp_.resize(groups, 0);
    }
    if (++epoch_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0u);
      epoch_ = 1;
    }
    touched_.clear();
  }
  void add(std::int32_t c, double v) {
    if (stamp_[c] != epoch_) {
      stamp_[c] = epoch_;
      sum_[c] = 0.0;
      touched_.push_back(c);
    }
    sum_[c] += v;
  }
  double sum_squares() const {
    double t = 0.0;
    for (std::int32_t c : touched_) t += sum_[c] * sum_[c];
    return t;
  }

 private:
  std::vector<double> sum_;
  std::vector<std::uint32_t> stamp_;
  std::vector<std::int32_t> touched_;
  std::uint32_t epoch_ = 0;
};

}  // namespace detail

// Reusable scratch for estimate_variances; hot loops keep one per worker.
struct VarianceWorkspace {
  detail::GroupAccumulator by_g, by_h, by_cell;
};

// Cluster-sum-of-squares estimators from one fit. The common prefactor
// n_obs/n^2 matches the influence normalization of eta_hat, making each value
// directly comparable across sampling intensities.
inline VarianceSet estimate_variances(const Fit& f, const Population& pop, VarianceWorkspace& ws) {
  if (f.n != pop.size()) throw ArgumentError("estimate_variances: fit does not match population");
  ws.by_g.begin(pop.num_g());
  ws.by_h.begin(pop.num_h());
  ws.by_cell.begin(pop.num_cells());

  double sum_sq = 0.0;
  for (std::size_t k = 0; k < f.observed.size(); ++k) {
    const std::int64_t i = f.observed[k];
    const double e = f.eta_hat[k];
    sum_sq += e * e;
    ws.by_g.add(pop.g(i), e);
    ws.by_h.add(pop.h(i), e);
    ws.by_cell.add(pop.cell(i), e);
  }

  const double n = static_cast<double>(f.n);
  const double scale = static_cast<double>(f.n_obs) / (n * n);

  VarianceSet v;
  v.ehw = scale * sum_sq;
  v.lzg = scale * ws.by_g.sum_squares();
  v.lzh = scale * ws.by_h.sum_squares();
  v.lzm = scale * ws.by_cell.sum_squares();
  v.cgm = v.lzg + (v.lzh - v.lzm);
  v.cgm2 = v.lzg + v.lzh;
  if (v.cgm < 0.0) {
    v.cgm = 0.0;
    v.cgm_clamped = true;
  }
  return v;
}

inline VarianceSet estimate_variances(const Fit& f, const Population& pop) {
  VarianceWorkspace ws;
  return estimate_variances(f, pop, ws);
}

namespace detail {

// Coefficients of the influence cross-moment E[xi_i xi_j] as a bilinear form
// in the potential residuals: c11*u1u1' + c00*u0u0' + c10*(u1u0' + u0u1').
struct PairClassCoef {
  double c11 = 0.0;
  double c00 = 0.0;
  double c10 = 0.0;
};

inline PairClassCoef xi_coefficients(const SamplingSpec& s, const AssignmentSpec& a, PairRelation rel,
                                     bool diagonal) {
  const double b1 = prob_treated_observed(s, a);
  const double b0 = prob_control_observed(s, a);
  if (b1 <= 0.0 || b0 <= 0.0)
    throw InvalidMechanismError("mechanism leaves an arm with zero observation probability");
  const double err = cross_moment_r(s, rel, diagonal);
  const double wtt = cross_moment_w(a, rel, diagonal, Arm::Treated, Arm::Treated);
  const double wuu = cross_moment_w(a, rel, diagonal, Arm::Untreated, Arm::Untreated);
  const double wtu = cross_moment_w(a, rel, diagonal, Arm::Treated, Arm::Untreated);
  PairClassCoef c;
  c.c11 = err * wtt / (b1 * b1) - 1.0;
  c.c00 = err * wuu / (b0 * b0) - 1.0;
  c.c10 = -(err * wtu / (b1 * b0) - 1.0);
  return c;
}

// Population cluster-sum products P_X(a,b) = sum_c S_c(u_a) S_c(u_b) for the
// G, H and intersection partitions plus the unit-diagonal products. These are
// the sufficient statistics for every pair-class sum via inclusion-exclusion.
struct BilinearSums {
  double pg11 = 0, pg00 = 0, pg10 = 0;
  double ph11 = 0, ph00 = 0, ph10 = 0;
  double pm11 = 0, pm00 = 0, pm10 = 0;
  double d11 = 0, d00 = 0, d10 = 0;
};

inline BilinearSums collect_bilinear_sums(const Population& pop) {
  std::vector<double> sg1(pop.num_g(), 0.0), sg0(pop.num_g(), 0.0);
  std::vector<double> sh1(pop.num_h(), 0.0), sh0(pop.num_h(), 0.0);
  std::vector<double> sm1(pop.num_cells(), 0.0), sm0(pop.num_cells(), 0.0);
  BilinearSums b;
  for (std::int64_t i = 0; i < pop.size(); ++i) {
    const double u1 = pop.u1(i), u0 = pop.u0(i);
    sg1[pop.g(i)] += u1;
    sg0[pop.g(i)] += u0;
    sh1[pop.h(i)] += u1;
    sh0[pop.h(i)] += u0;
    sm1[pop.cell(i)] += u1;
    sm0[pop.cell(i)] += u0;
    b.d11 += u1 * u1;
    b.d00 += u0 * u0;
    b.d10 += u1 * u0;
  }
  for (std::int32_t c = 0; c < pop.num_g(); ++c) {
    b.pg11 += sg1[c] * sg1[c];
    b.pg00 += sg0[c] * sg0[c];
    b.pg10 += sg1[c] * sg0[c];
  }
  for (std::int32_t c = 0; c < pop.num_h(); ++c) {
    b.ph11 += sh1[c] * sh1[c];
    b.ph00 += sh0[c] * sh0[c];
    b.ph10 += sh1[c] * sh0[c];
  }
  for (std::int32_t c = 0; c < pop.num_cells(); ++c) {
    b.pm11 += sm1[c] * sm1[c];
    b.pm00 += sm0[c] * sm0[c];
    b.pm10 += sm1[c] * sm0[c];
  }
  return b;
}

inline double apply_coef(const PairClassCoef& c, double t11, double t00, double t10) {
  return c.c11 * t11 + c.c00 * t00 + 2.0 * c.c10 * t10;
}

// Pair-class sums of E[xi_i xi_j] over the population. Classes partition the
// neighbor set: diagonal, same intersection (off-diagonal), same G only, same
// H only; the intersection is subtracted last in each difference.
struct XiClassSums {
  double diag = 0.0;
  double same_cell = 0.0;
  double same_g_only = 0.0;
  double same_h_only = 0.0;
  double neighbors() const { return diag + same_cell + same_g_only + same_h_only; }
};

inline XiClassSums xi_class_sums(const BilinearSums& b, const SamplingSpec& s, const AssignmentSpec& a) {
  XiClassSums x;
  const PairClassCoef cd = xi_coefficients(s, a, PairRelation::SameIntersection, true);
  const PairClassCoef cm = xi_coefficients(s, a, PairRelation::SameIntersection, false);
  const PairClassCoef cg = xi_coefficients(s, a, PairRelation::SameGOnly, false);
  const PairClassCoef ch = xi_coefficients(s, a, PairRelation::SameHOnly, false);
  x.diag = apply_coef(cd, b.d11, b.d00, b.d10);
  x.same_cell = apply_coef(cm, b.pm11 - b.d11, b.pm00 - b.d00, b.pm10 - b.d10);
  x.same_g_only = apply_coef(cg, b.pg11 - b.pm11, b.pg00 - b.pm00, b.pg10 - b.pm10);
  x.same_h_only = apply_coef(ch, b.ph11 - b.pm11, b.ph00 - b.pm00, b.ph10 - b.pm10);
  return x;
}

}  // namespace detail

// Design variance of sqrt(N)(tau_hat - tau): the neighbor-pair sum of
// E[xi_i xi_j] scaled by E[N]/n^2, with E[N] = n(b1+b0). Runs in
// O(n + clusters).
inline double true_variance(const Population& pop, const SamplingSpec& s, const AssignmentSpec& a) {
  s.validate();
  a.validate();
  const detail::BilinearSums b = detail::collect_bilinear_sums(pop);
  const detail::XiClassSums x = detail::xi_class_sums(b, s, a);
  const double b1 = prob_treated_observed(s, a);
  const double b0 = prob_control_observed(s, a);
  const double scale = (b1 + b0) / static_cast<double>(pop.size());
  return scale * x.neighbors();
}

// Large-sample targets of the five feasible estimators plus their distances
// from the design variance. E[eta_i eta_j] = E[xi_i xi_j] + e_i e_j with
// e_i = u1_i - u0_i, so each limit is a xi class sum plus an effect-deviation
// cluster product.
struct TheoreticalVariances {
  double v = 0.0;
  double v_ehw = 0.0;
  double v_lzg = 0.0;
  double v_lzh = 0.0;
  double v_cgm = 0.0;
  double v_cgm2 = 0.0;
  double gap_ehw = 0.0;   // v_ehw - v
  double gap_lzg = 0.0;   // v_lzg - v
  double gap_cgm = 0.0;   // v_cgm - v
  double gap_cgm2 = 0.0;  // v_cgm2 - v
};

inline TheoreticalVariances limit_variances(const Population& pop, const SamplingSpec& s,
                                            const AssignmentSpec& a) {
  s.validate();
  a.validate();
  const detail::BilinearSums b = detail::collect_bilinear_sums(pop);
  const detail::XiClassSums x = detail::xi_class_sums(b, s, a);

  // Effect-deviation products: sum over same-cluster pairs of e_i e_j.
  const double pge = b.pg11 - 2.0 * b.pg10 + b.pg00;
  const double phe = b.ph11 - 2.0 * b.ph10 + b.ph00;
  const double pme = b.pm11 - 2.0 * b.pm10 + b.pm00;
  const double de = b.d11 - 2.0 * b.d10 + b.d00;

  const double b1 = prob_treated_observed(s, a);
  const double b0 = prob_control_observed(s, a);
  const double scale = (b1 + b0) / static_cast<double>(pop.size());

  TheoreticalVariances t;
  t.v = scale * x.neighbors();
  t.v_ehw = scale * (x.diag + de);
  t.v_lzg = scale * (x.diag + x.same_cell + x.same_g_only + pge);
  t.v_lzh = scale * (x.diag + x.same_cell + x.same_h_only + phe);
  t.v_cgm = scale * (x.neighbors() + pge + phe - pme);
  t.v_cgm2 = t.v_lzg + t.v_lzh;
  t.gap_ehw = scale * (de - (x.same_cell + x.same_g_only + x.same_h_only));
  t.gap_lzg = scale * (pge - x.same_h_only);
  t.gap_cgm = scale * (pge + phe - pme);
  t.gap_cgm2 = scale * (x.diag + x.same_cell + pge + phe);
  return t;
}

// Cluster-size concentration diagnostics for one dimension: a vanishing
// max^2/n is the leverage condition behind the normal limit.
struct ClusterRegularity {
  std::int64_t clusters = 0;
  std::int64_t max_size = 0;
  double max_size_sq = 0.0;
  double sum_size_sq = 0.0;
  double max_sq_over_n = 0.0;
  double sum_sq_over_n = 0.0;
};

struct RegularityReport {
  ClusterRegularity g;
  ClusterRegularity h;
};

inline ClusterRegularity cluster_regularity(const std::vector<std::int64_t>& counts, std::int64_t n) {
  ClusterRegularity r;
  r.clusters = static_cast<std::int64_t>(counts.size());
  for (std::int64_t c : counts) {
    r.max_size = std::max(r.max_size, c);
    r.sum_size_sq += static_cast<double>(c) * static_cast<double>(c);
  }
  r.max_size_sq = static_cast<double>(r.max_size) * static_cast<double>(r.max_size);
  r.max_sq_over_n = r.max_size_sq / static_cast<double>(n);
  r.sum_sq_over_n = r.sum_size_sq / static_cast<double>(n);
  return r;
}

inline RegularityReport regularity_report(const Population& pop) {
  RegularityReport rep;
  rep.g = cluster_regularity(pop.g_counts(), pop.size());
  rep.h = cluster_regularity(pop.h_counts(), pop.size());
  return rep;
}

}  // namespace mwclust
