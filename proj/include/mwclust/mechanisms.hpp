#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mwclust/common.hpp"
#include "mwclust/population.hpp"
#include "mwclust/rng.hpp"

namespace mwclust {

// How two distinct units relate through the cluster structure.
enum class PairRelation { SameIntersection, SameGOnly, SameHOnly, Unrelated };

inline PairRelation relation_of(std::int32_t gi, std::int32_t hi, std::int32_t gj, std::int32_t hj) {
  if (gi == gj) return hi == hj ? PairRelation::SameIntersection : PairRelation::SameGOnly;
  return hi == hj ? PairRelation::SameHOnly : PairRelation::Unrelated;
}

enum class Arm { Treated, Untreated };

namespace detail {
inline void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidMechanismError(std::string(what) + " must lie in [0,1]");
}
}  // namespace detail

// Sampling mechanism for the observation indicator R.
//  Full        : everyone observed.
//  IID         : unit-level Bernoulli(p).
//  OneWayG     : G-cluster gate Bernoulli(q), then unit Bernoulli(p) inside
//                sampled clusters.
//  MultiwayAND : independent G gate Bernoulli(a) and H gate Bernoulli(b);
//                units behind two open gates kept with probability p.
struct SamplingSpec {
  enum class Kind { Full, IID, OneWayG, MultiwayAND };
  Kind kind = Kind::Full;
  double p = 1.0;
  double q = 1.0;
  double a = 1.0;
  double b = 1.0;

  static SamplingSpec full() { return {}; }
  static SamplingSpec iid(double p) { return {Kind::IID, p, 1.0, 1.0, 1.0}; }
  static SamplingSpec oneway_g(double q, double p) { return {Kind::OneWayG, p, q, 1.0, 1.0}; }
  static SamplingSpec multiway_and(double a, double b, double p) { return {Kind::MultiwayAND, p, 1.0, a, b}; }

  void validate() const {
    detail::check_prob(p, "sampling p");
    detail::check_prob(q, "sampling q");
    detail::check_prob(a, "sampling a");
    detail::check_prob(b, "sampling b");
  }

  double marginal() const {
    switch (kind) {
      case Kind::Full: return 1.0;
      case Kind::IID: return p;
      case Kind::OneWayG: return q * p;
      case Kind::MultiwayAND: return a * b * p;
    }
    return 0.0;
  }
  bool operator==(const SamplingSpec&) const = default;
};

// Distribution of a per-H-cluster assignment probability.
struct AssignDist {
  enum class Kind { Uniform01, TwoPoint };
  Kind kind = Kind::Uniform01;
  double v0 = 0.0;  // TwoPoint low value
  double v1 = 1.0;  // TwoPoint high value
  double p1 = 0.5;  // probability of v1

  static AssignDist uniform01() { return {}; }
  static AssignDist two_point(double v0, double v1, double p1) { return {Kind::TwoPoint, v0, v1, p1}; }

  void validate() const {
    if (kind == Kind::TwoPoint) {
      detail::check_prob(v0, "two-point value");
      detail::check_prob(v1, "two-point value");
      detail::check_prob(p1, "two-point weight");
    }
  }
  double mean() const { return kind == Kind::Uniform01 ? 0.5 : p1 * v1 + (1.0 - p1) * v0; }
  double variance() const {
    if (kind == Kind::Uniform01) return 1.0 / 12.0;
    double m = mean();
    return p1 * (v1 - m) * (v1 - m) + (1.0 - p1) * (v0 - m) * (v0 - m);
  }
  double sample(RandomStream& rs) const {
    return kind == Kind::Uniform01 ? rs.uniform() : (rs.bernoulli(p1) ? v1 : v0);
  }
  bool operator==(const AssignDist&) const = default;
};

// Assignment mechanism for the treatment indicator W.
//  IID         : unit-level Bernoulli(mu).
//  OneWayH     : each H cluster draws a probability from `dist`; units are
//                assigned independently at that probability.
//  MultiwayAND : G gate Bernoulli(p_a) and H gate Bernoulli(p_b); the unit is
//                treated exactly when both gates are open.
struct AssignmentSpec {
  enum class Kind { IID, OneWayH, MultiwayAND };
  Kind kind = Kind::IID;
  double mu = 0.5;
  AssignDist dist;
  double p_a = 1.0;
  double p_b = 1.0;

  static AssignmentSpec iid(double mu) {
    AssignmentSpec s;
    s.kind = Kind::IID;
    s.mu = mu;
    return s;
  }
  static AssignmentSpec oneway_h(AssignDist d) {
    AssignmentSpec s;
    s.kind = Kind::OneWayH;
    s.dist = d;
    return s;
  }
  static AssignmentSpec multiway_and(double p_a, double p_b) {
    AssignmentSpec s;
    s.kind = Kind::MultiwayAND;
    s.p_a = p_a;
    s.p_b = p_b;
    return s;
  }

  void validate() const {
    detail::check_prob(mu, "assignment mu");
    detail::check_prob(p_a, "assignment p_a");
    detail::check_prob(p_b, "assignment p_b");
    dist.validate();
  }

  double marginal() const {
    switch (kind) {
      case Kind::IID: return mu;
      case Kind::OneWayH: return dist.mean();
      case Kind::MultiwayAND: return p_a * p_b;
    }
    return 0.0;
  }
  bool operator==(const AssignmentSpec&) const = default;
};

// Per-unit observation probability of the treated / control arm.
inline double prob_treated_observed(const SamplingSpec& s, const AssignmentSpec& a) {
  return s.marginal() * a.marginal();
}
inline double prob_control_observed(const SamplingSpec& s, const AssignmentSpec& a) {
  return s.marginal() * (1.0 - a.marginal());
}

// E[R_i R_j] for a pair in the given relation; `diagonal` selects i = j
// (where the product collapses to the marginal).
inline double cross_moment_r(const SamplingSpec& s, PairRelation rel, bool diagonal) {
  s.validate();
  if (diagonal) return s.marginal();
  switch (s.kind) {
    case SamplingSpec::Kind::Full: return 1.0;
    case SamplingSpec::Kind::IID: return s.p * s.p;
    case SamplingSpec::Kind::OneWayG: {
      const bool same_g = rel == PairRelation::SameIntersection || rel == PairRelation::SameGOnly;
      return same_g ? s.q * s.p * s.p : s.q * s.q * s.p * s.p;
    }
    case SamplingSpec::Kind::MultiwayAND: {
      const double pp = s.p * s.p;
      switch (rel) {
        case PairRelation::SameIntersection: return s.a * s.b * pp;
        case PairRelation::SameGOnly: return s.a * s.b * s.b * pp;
        case PairRelation::SameHOnly: return s.a * s.a * s.b * pp;
        case PairRelation::Unrelated: return s.a * s.a * s.b * s.b * pp;
      }
      break;
    }
  }
  return 0.0;
}

namespace detail {
// E[W_i W_j]; diagonal gives E[W^2] = E[W].
inline double pair_moment_ww(const AssignmentSpec& a, PairRelation rel, bool diagonal) {
  if (diagonal) return a.marginal();
  switch (a.kind) {
    case AssignmentSpec::Kind::IID: return a.mu * a.mu;
    case AssignmentSpec::Kind::OneWayH: {
      const bool same_h = rel == PairRelation::SameIntersection || rel == PairRelation::SameHOnly;
      const double m = a.dist.mean();
      return same_h ? a.dist.variance() + m * m : m * m;
    }
    case AssignmentSpec::Kind::MultiwayAND: {
      switch (rel) {
        case PairRelation::SameIntersection: return a.p_a * a.p_b;
        case PairRelation::SameGOnly: return a.p_a * a.p_b * a.p_b;
        case PairRelation::SameHOnly: return a.p_a * a.p_a * a.p_b;
        case PairRelation::Unrelated: return a.p_a * a.p_a * a.p_b * a.p_b;
      }
      break;
    }
  }
  return 0.0;
}
}  // namespace detail

// E[W~_i W~_j] where W~ is W for a treated slot and 1-W for a control slot.
// Mixed and control-control moments follow from E[W_i W_j] by expanding the
// complements, which keeps every mechanism variant in one place.
inline double cross_moment_w(const AssignmentSpec& a, PairRelation rel, bool diagonal, Arm arm_i, Arm arm_j) {
  a.validate();
  const double ew = a.marginal();
  const double eww = detail::pair_moment_ww(a, rel, diagonal);
  if (arm_i == Arm::Treated && arm_j == Arm::Treated) return eww;
  if (arm_i != arm_j) return ew - eww;
  return 1.0 - 2.0 * ew + eww;
}

// Realized indicators for one replication.
struct Draw {
  std::vector<std::uint8_t> r;
  std::vector<std::uint8_t> w;
};

// Gate draws come first (G gates, then H gates, cluster label order), then
// unit-level draws in unit order; a fixed consumption order makes a draw a
// pure function of (population, spec, stream state).
inline void draw_sampling_into(const Population& pop, const SamplingSpec& spec, RandomStream& rs,
                               std::vector<std::uint8_t>& r) {
  spec.validate();
  const std::int64_t n = pop.size();
  r.resize(n);
  switch (spec.kind) {
    case SamplingSpec::Kind::Full:
      std::fill(r.begin(), r.end(), std::uint8_t{1});
      break;
    case SamplingSpec::Kind::IID:
      if (spec.p >= 1.0) {
        std::fill(r.begin(), r.end(), std::uint8_t{1});
      } else {
        for (std::int64_t i = 0; i < n; ++i) r[i] = rs.bernoulli(spec.p);
      }
      break;
    case SamplingSpec::Kind::OneWayG: {
      std::vector<std::uint8_t> gate(pop.num_g());
      for (auto& x : gate) x = rs.bernoulli(spec.q);
      for (std::int64_t i = 0; i < n; ++i)
        r[i] = gate[pop.g(i)] ? static_cast<std::uint8_t>(rs.bernoulli(spec.p)) : std::uint8_t{0};
      break;
    }
    case SamplingSpec::Kind::MultiwayAND: {
      std::vector<std::uint8_t> gate_g(pop.num_g()), gate_h(pop.num_h());
      for (auto& x : gate_g) x = rs.bernoulli(spec.a);
      for (auto& x : gate_h) x = rs.bernoulli(spec.b);
      for (std::int64_t i = 0; i < n; ++i)
        r[i] = (gate_g[pop.g(i)] && gate_h[pop.h(i)]) ? static_cast<std::uint8_t>(rs.bernoulli(spec.p))
                                                      : std::uint8_t{0};
      break;
    }
  }
}

inline void draw_assignment_into(const Population& pop, const AssignmentSpec& spec, RandomStream& rs,
                                 std::vector<std::uint8_t>& w) {
  spec.validate();
  const std::int64_t n = pop.size();
  w.resize(n);
  switch (spec.kind) {
    case AssignmentSpec::Kind::IID:
      for (std::int64_t i = 0; i < n; ++i) w[i] = rs.bernoulli(spec.mu);
      break;
    case AssignmentSpec::Kind::OneWayH: {
      std::vector<double> prob(pop.num_h());
      for (auto& x : prob) x = spec.dist.sample(rs);
      for (std::int64_t i = 0; i < n; ++i) w[i] = rs.bernoulli(prob[pop.h(i)]);
      break;
    }
    case AssignmentSpec::Kind::MultiwayAND: {
      std::vector<std::uint8_t> gate_g(pop.num_g()), gate_h(pop.num_h());
      for (auto& x : gate_g) x = rs.bernoulli(spec.p_a);
      for (auto& x : gate_h) x = rs.bernoulli(spec.p_b);
      for (std::int64_t i = 0; i < n; ++i) w[i] = gate_g[pop.g(i)] && gate_h[pop.h(i)];
      break;
    }
  }
}

inline std::vector<std::uint8_t> draw_sampling(const Population& pop, const SamplingSpec& spec,
                                               RandomStream& rs) {
  std::vector<std::uint8_t> r;
  draw_sampling_into(pop, spec, rs, r);
  return r;
}

inline std::vector<std::uint8_t> draw_assignment(const Population& pop, const AssignmentSpec& spec,
                                                 RandomStream& rs) {
  std::vector<std::uint8_t> w;
  draw_assignment_into(pop, spec, rs, w);
  return w;
}

}  // namespace mwclust
