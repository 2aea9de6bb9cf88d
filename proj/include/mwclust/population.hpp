#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mwclust/common.hpp"
#include "mwclust/rng.hpp"

namespace mwclust {

// One population member: two cluster labels and both potential outcomes.
struct Unit {
  std::int64_t id = 0;
  std::int32_t g = 0;
  std::int32_t h = 0;
  double y1 = 0.0;
  double y0 = 0.0;
};

enum class EffectVariant { Gvar, Hvar, Same, Constant, OddEven };

inline const char* to_string(EffectVariant v) {
  switch (v) {
    case EffectVariant::Gvar: return "Gvar";
    case EffectVariant::Hvar: return "Hvar";
    case EffectVariant::Same: return "same";
    case EffectVariant::Constant: return "constant";
    case EffectVariant::OddEven: return "oddeven";
  }
  return "?";
}

inline EffectVariant effect_variant_from_string(const std::string& s) {
  if (s == "Gvar") return EffectVariant::Gvar;
  if (s == "Hvar") return EffectVariant::Hvar;
  if (s == "same") return EffectVariant::Same;
  if (s == "constant") return EffectVariant::Constant;
  if (s == "oddeven") return EffectVariant::OddEven;
  throw ArgumentError("unknown effect scheme '" + s + "'");
}

// Treatment-effect layout plus additive unit noise. `noise` is a variance by
// default; flip `noise_is_sd` to read it as a standard deviation.
struct EffectScheme {
  EffectVariant variant = EffectVariant::Constant;
  double noise = 0.1;
  bool noise_is_sd = false;

  double noise_sd() const {
    if (noise < 0.0) throw ArgumentError("effect noise must be non-negative");
    return noise_is_sd ? noise : std::sqrt(noise);
  }
  bool operator==(const EffectScheme&) const = default;
};

// Fixed finite population with two overlapping cluster dimensions. Stored
// column-wise; `cell` is a compact index of the nonempty (g,h) intersections.
// Centered potential residuals u1/u0 and the population averages are kept in
// sync with y1/y0.
class Population {
 public:
  static constexpr std::int64_t kMaxUnits = 2147483647;  // int32 indexing cap

  std::int64_t size() const { return static_cast<std::int64_t>(g_.size()); }
  std::int32_t num_g() const { return num_g_; }
  std::int32_t num_h() const { return num_h_; }
  std::int32_t num_cells() const { return num_cells_; }

  std::int64_t id(std::int64_t i) const { return id_[i]; }
  std::int32_t g(std::int64_t i) const { return g_[i]; }
  std::int32_t h(std::int64_t i) const { return h_[i]; }
  std::int32_t cell(std::int64_t i) const { return cell_[i]; }
  double y1(std::int64_t i) const { return y1_[i]; }
  double y0(std::int64_t i) const { return y0_[i]; }
  double u1(std::int64_t i) const { return u1_[i]; }
  double u0(std::int64_t i) const { return u0_[i]; }

  Unit unit(std::int64_t i) const { return Unit{id_[i], g_[i], h_[i], y1_[i], y0_[i]}; }

  const std::vector<std::int64_t>& g_counts() const { return count_g_; }
  const std::vector<std::int64_t>& h_counts() const { return count_h_; }
  const std::vector<std::int64_t>& cell_counts() const { return count_cell_; }

  double tau() const { return tau_; }
  double alpha() const { return alpha_; }

  // Overwrites both potential-outcome columns and refreshes the derived
  // residuals/averages. Lengths must match the population.
  void set_outcomes(std::vector<double> y1, std::vector<double> y0) {
    if (static_cast<std::int64_t>(y1.size()) != size() || static_cast<std::int64_t>(y0.size()) != size())
      throw ArgumentError("set_outcomes: length mismatch");
    y1_ = std::move(y1);
    y0_ = std::move(y0);
    recompute_moments();
  }

  static Population from_units(const std::vector<Unit>& units);

  friend Population build_balanced(std::int32_t g_clusters, std::int32_t h_clusters, std::int64_t per_cell);
  friend Population build_staircase(std::int32_t m, std::int64_t m0);
  friend Population thin_population(const Population& pop, double fraction, std::uint64_t seed);

 private:
  void finalize_structure();  // counts + cell compaction from labels
  void recompute_moments();

  std::vector<std::int64_t> id_;
  std::vector<std::int32_t> g_, h_, cell_;
  std::vector<double> y1_, y0_, u1_, u0_;
  std::vector<std::int64_t> count_g_, count_h_, count_cell_;
  std::int32_t num_g_ = 0, num_h_ = 0, num_cells_ = 0;
  double tau_ = 0.0, alpha_ = 0.0;
};

inline void Population::finalize_structure() {
  const std::int64_t n = size();
  if (n == 0) throw DegeneratePopulationError("population has no units");
  std::int32_t max_g = 0, max_h = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    if (g_[i] < 0 || h_[i] < 0) throw GeometryError("cluster labels must be non-negative");
    max_g = std::max(max_g, g_[i]);
    max_h = std::max(max_h, h_[i]);
  }
  num_g_ = max_g + 1;
  num_h_ = max_h + 1;
  count_g_.assign(num_g_, 0);
  count_h_.assign(num_h_, 0);

  cell_.assign(n, -1);
  std::unordered_map<std::int64_t, std::int32_t> cell_ids;
  cell_ids.reserve(static_cast<std::size_t>(std::min<std::int64_t>(n, 1 << 20)));
  count_cell_.clear();
  for (std::int64_t i = 0; i < n; ++i) {
    ++count_g_[g_[i]];
    ++count_h_[h_[i]];
    std::int64_t key = (static_cast<std::int64_t>(g_[i]) << 32) | static_cast<std::uint32_t>(h_[i]);
    auto [it, inserted] = cell_ids.try_emplace(key, static_cast<std::int32_t>(count_cell_.size()));
    if (inserted) count_cell_.push_back(0);
    cell_[i] = it->second;
    ++count_cell_[it->second];
  }
  num_cells_ = static_cast<std::int32_t>(count_cell_.size());
}

inline void Population::recompute_moments() {
  const std::int64_t n = size();
  KahanSum sum_diff, sum_y0;
  for (std::int64_t i = 0; i < n; ++i) {
    sum_diff.add(y1_[i] - y0_[i]);
    sum_y0.add(y0_[i]);
  }
  tau_ = sum_diff.value() / static_cast<double>(n);
  alpha_ = sum_y0.value() / static_cast<double>(n);
  u1_.resize(n);
  u0_.resize(n);
  for (std::int64_t i = 0; i < n; ++i) {
    u1_[i] = y1_[i] - alpha_ - tau_;
    u0_[i] = y0_[i] - alpha_;
  }
}

inline Population Population::from_units(const std::vector<Unit>& units) {
  if (units.empty()) throw DegeneratePopulationError("from_units: no units");
  if (static_cast<std::int64_t>(units.size()) > kMaxUnits) throw SizeError("from_units: too many units");
  Population p;
  const std::int64_t n = static_cast<std::int64_t>(units.size());
  p.id_.resize(n);
  p.g_.resize(n);
  p.h_.resize(n);
  p.y1_.resize(n);
  p.y0_.resize(n);
  for (std::int64_t i = 0; i < n; ++i) {
    p.id_[i] = units[i].id;
    p.g_[i] = units[i].g;
    p.h_[i] = units[i].h;
    p.y1_[i] = units[i].y1;
    p.y0_[i] = units[i].y0;
  }
  p.finalize_structure();
  p.recompute_moments();
  return p;
}

// Complete two-way layout: every (g,h) intersection holds `per_cell` units.
inline Population build_balanced(std::int32_t g_clusters, std::int32_t h_clusters, std::int64_t per_cell) {
  if (g_clusters < 1 || h_clusters < 1 || per_cell < 1)
    throw GeometryError("build_balanced: all dimensions must be at least 1");
  const std::int64_t gh = static_cast<std::int64_t>(g_clusters) * static_cast<std::int64_t>(h_clusters);
  if (gh > Population::kMaxUnits / per_cell)
    throw SizeError("build_balanced: unit count exceeds supported range");
  const std::int64_t n = gh * per_cell;

  Population p;
  p.id_.resize(n);
  p.g_.resize(n);
  p.h_.resize(n);
  p.y1_.assign(n, 0.0);
  p.y0_.assign(n, 0.0);
  std::int64_t i = 0;
  for (std::int32_t g = 0; g < g_clusters; ++g)
    for (std::int32_t h = 0; h < h_clusters; ++h)
      for (std::int64_t k = 0; k < per_cell; ++k, ++i) {
        p.id_[i] = i;
        p.g_[i] = g;
        p.h_[i] = h;
      }
  p.finalize_structure();
  p.recompute_moments();
  return p;
}

// Banded layout on an m x m cluster grid, m even. Odd diagonal cells (k,k)
// carry 4*m0 units; their four lateral neighbors (k,k±1), (k±1,k) carry m0
// each, indices wrapping cyclically. Total 4*m0*m units.
inline Population build_staircase(std::int32_t m, std::int64_t m0) {
  if (m < 4 || m % 2 != 0) throw GeometryError("build_staircase: m must be even and at least 4");
  if (m0 < 1) throw GeometryError("build_staircase: m0 must be at least 1");
  if (m0 > Population::kMaxUnits / (4 * static_cast<std::int64_t>(m)))
    throw SizeError("build_staircase: unit count exceeds supported range");
  const std::int64_t n = 4 * m0 * static_cast<std::int64_t>(m);

  Population p;
  p.id_.reserve(n);
  p.g_.reserve(n);
  p.h_.reserve(n);
  auto emit = [&p](std::int32_t g, std::int32_t h, std::int64_t count) {
    for (std::int64_t k = 0; k < count; ++k) {
      p.id_.push_back(static_cast<std::int64_t>(p.id_.size()));
      p.g_.push_back(g);
      p.h_.push_back(h);
    }
  };
  for (std::int32_t k = 1; k < m; k += 2) {
    const std::int32_t prev = (k + m - 1) % m;
    const std::int32_t next = (k + 1) % m;
    emit(k, k, 4 * m0);
    emit(k, prev, m0);
    emit(k, next, m0);
    emit(prev, k, m0);
    emit(next, k, m0);
  }
  p.y1_.assign(n, 0.0);
  p.y0_.assign(n, 0.0);
  p.finalize_structure();
  p.recompute_moments();
  return p;
}

// Draws per-cluster effect shifts and unit noise, freezing y1/y0. Cluster
// draws are taken first (all G, then all H), then unit noise in index order,
// so a (geometry, scheme, seed) triple always produces the same population.
inline Population assign_effects(const Population& pop, const EffectScheme& scheme, std::uint64_t seed) {
  Population out = pop;
  RandomStream rs(seed);
  const std::int64_t n = out.size();

  double mag_g = 0.0, mag_h = 0.0;
  switch (scheme.variant) {
    case EffectVariant::Gvar: mag_g = 2.0; mag_h = 0.5; break;
    case EffectVariant::Hvar: mag_g = 0.5; mag_h = 2.0; break;
    case EffectVariant::Same: mag_g = 1.0; mag_h = 1.0; break;
    default: break;
  }
  std::vector<double> tau_g, tau_h;
  const bool cluster_draws = scheme.variant == EffectVariant::Gvar ||
                             scheme.variant == EffectVariant::Hvar ||
                             scheme.variant == EffectVariant::Same;
  if (cluster_draws) {
    tau_g.resize(out.num_g());
    tau_h.resize(out.num_h());
    for (auto& t : tau_g) t = rs.bernoulli(0.5) ? mag_g : -mag_g;
    for (auto& t : tau_h) t = rs.bernoulli(0.5) ? mag_h : -mag_h;
  }

  const double sd = scheme.noise_sd();
  std::vector<double> y1(n), y0(n);
  for (std::int64_t i = 0; i < n; ++i) {
    double effect;
    switch (scheme.variant) {
      case EffectVariant::Constant: effect = 1.0; break;
      case EffectVariant::OddEven: effect = (out.g(i) % 2 == 1 && out.h(i) % 2 == 1) ? 1.0 : -1.0; break;
      default: effect = tau_g[out.g(i)] + tau_h[out.h(i)]; break;
    }
    const double noise = rs.normal(0.0, sd);
    y0[i] = noise;
    y1[i] = effect + noise;
  }
  out.set_outcomes(std::move(y1), std::move(y0));
  return out;
}

// Keeps each unit independently with the given probability and freezes the
// survivors as a new population (its own tau/alpha). Label spaces are
// preserved; clusters may end up empty.
inline Population thin_population(const Population& pop, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("thin_population: fraction must lie in (0,1]");
  if (fraction >= 1.0) return pop;

  RandomStream rs(seed);
  Population out;
  out.num_g_ = pop.num_g_;
  out.num_h_ = pop.num_h_;
  out.num_cells_ = pop.num_cells_;
  out.count_g_.assign(pop.num_g_, 0);
  out.count_h_.assign(pop.num_h_, 0);
  out.count_cell_.assign(pop.num_cells_, 0);
  const std::int64_t n = pop.size();
  for (std::int64_t i = 0; i < n; ++i) {
    if (!rs.bernoulli(fraction)) continue;
    out.id_.push_back(pop.id_[i]);
    out.g_.push_back(pop.g_[i]);
    out.h_.push_back(pop.h_[i]);
    out.cell_.push_back(pop.cell_[i]);
    out.y1_.push_back(pop.y1_[i]);
    out.y0_.push_back(pop.y0_[i]);
    ++out.count_g_[pop.g_[i]];
    ++out.count_h_[pop.h_[i]];
    ++out.count_cell_[pop.cell_[i]];
  }
  if (out.id_.empty()) throw DegeneratePopulationError("thin_population: no units retained");
  out.recompute_moments();
  return out;
}

inline double population_ate(const Population& pop) { return pop.tau(); }

inline void save_population(const Population& pop, std::ostream& os) {
  os << "id,g,h,y1,y0\n";
  char buf[128];
  for (std::int64_t i = 0; i < pop.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%lld,%d,%d,%.17g,%.17g\n", static_cast<long long>(pop.id(i)),
                  pop.g(i), pop.h(i), pop.y1(i), pop.y0(i));
    os << buf;
  }
}

inline Population load_population(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "id,g,h,y1,y0")
    throw ArgumentError("load_population: missing id,g,h,y1,y0 header");
  std::vector<Unit> units;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Unit u;
    long long id;
    if (std::sscanf(line.c_str(), "%lld,%d,%d,%lg,%lg", &id, &u.g, &u.h, &u.y1, &u.y0) != 5)
      throw ArgumentError("load_population: malformed row '" + line + "'");
    u.id = id;
    units.push_back(u);
  }
  return Population::from_units(units);
}

inline void save_population(const Population& pop, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ArgumentError("save_population: cannot open " + path);
  save_population(pop, os);
}

inline Population load_population(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ArgumentError("load_population: cannot open " + path);
  return load_population(is);
}

}  // namespace mwclust
