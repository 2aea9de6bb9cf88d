#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "mwclust/common.hpp"
#include "mwclust/estimator.hpp"
#include "mwclust/mechanisms.hpp"
#include "mwclust/population.hpp"
#include "mwclust/rng.hpp"
#include "mwclust/variance.hpp"

namespace mwclust {

// Population layout before outcomes are attached.
struct GeometrySpec {
  enum class Kind { Balanced, Staircase };
  Kind kind = Kind::Balanced;
  std::int32_t g = 1;
  std::int32_t h = 1;
  std::int64_t per_cell = 1;
  std::int32_t m = 4;
  std::int64_t m0 = 1;

  static GeometrySpec balanced(std::int32_t g, std::int32_t h, std::int64_t per_cell) {
    GeometrySpec s;
    s.kind = Kind::Balanced;
    s.g = g;
    s.h = h;
    s.per_cell = per_cell;
    return s;
  }
  static GeometrySpec staircase(std::int32_t m, std::int64_t m0) {
    GeometrySpec s;
    s.kind = Kind::Staircase;
    s.m = m;
    s.m0 = m0;
    return s;
  }

  Population build() const {
    return kind == Kind::Balanced ? build_balanced(g, h, per_cell) : build_staircase(m, m0);
  }
  bool operator==(const GeometrySpec&) const = default;
};

// A full simulation scenario: fixed population recipe plus the two draw
// mechanisms and replication settings.
struct Design {
  std::string name;
  GeometrySpec geometry;
  EffectScheme effects;
  SamplingSpec sampling;
  AssignmentSpec assignment;
  double thin_fraction = 1.0;
  std::int64_t nsim = 5000;
  double level = 0.95;

  bool operator==(const Design&) const = default;
};

// Estimator slots, in reporting order.
inline constexpr int kNumEstimators = 5;
inline constexpr std::array<const char*, kNumEstimators> kEstimatorNames = {"EHW", "LZG", "LZH", "CGM",
                                                                            "CGM2"};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return lo <= x && x <= hi; }
};

// Two-sided interval for tau_hat; v_hat is on the per-observation scale, so
// the squared standard error is v_hat / n_obs.
inline Interval confidence_interval(double tau_hat, double v_hat, std::int64_t n_obs, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("confidence level must lie in (0,1)");
  if (n_obs <= 0) throw ArgumentError("confidence_interval needs a positive observation count");
  const double z = normal_quantile(0.5 + level / 2.0);
  const double half = z * std::sqrt(std::max(0.0, v_hat) / static_cast<double>(n_obs));
  return {tau_hat - half, tau_hat + half};
}

// Fixed stream tags: population effects and thinning use low tags, replication
// r uses kRepStreamBase + r. Tags, not sequential draws, keep every
// replication reproducible in isolation and independent of worker scheduling.
inline constexpr std::uint64_t kEffectStreamTag = 1;
inline constexpr std::uint64_t kThinStreamTag = 2;
inline constexpr std::uint64_t kRepStreamBase = 100;

inline Population build_design_population(const Design& d, std::uint64_t master_seed) {
  Population pop = d.geometry.build();
  pop = assign_effects(pop, d.effects, derive_stream_seed(master_seed, kEffectStreamTag));
  if (d.thin_fraction < 1.0)
    pop = thin_population(pop, d.thin_fraction, derive_stream_seed(master_seed, kThinStreamTag));
  return pop;
}

struct DesignResult {
  std::string name;
  std::int64_t nsim = 0;
  std::uint64_t master_seed = 0;
  std::int64_t used = 0;
  std::int64_t degenerate = 0;  // replications with an empty arm
  std::int64_t clamped = 0;     // replications where cgm was clamped at zero
  std::array<double, kNumEstimators> coverage{};
  std::array<double, kNumEstimators> mean_variance{};  // mean of v_hat / n_obs
};

namespace detail {

struct RepRecord {
  bool used = false;
  bool clamped = false;
  std::array<double, kNumEstimators> var_tau{};
  std::array<bool, kNumEstimators> covered{};
};

}  // namespace detail

// Runs the design's replications and aggregates coverage and mean estimated
// variances. Each replication consumes its own derived stream and writes a
// dedicated record slot; the reduction happens afterwards in replication
// order, so results are byte-identical for any worker count.
inline DesignResult run_design(const Design& d, std::uint64_t master_seed, int workers = 1) {
  if (d.nsim < 1) throw ArgumentError("run_design: nsim must be at least 1");
  if (workers < 1) workers = 1;
  d.sampling.validate();
  d.assignment.validate();

  const Population pop = build_design_population(d, master_seed);
  const double tau = pop.tau();
  const double z = normal_quantile(0.5 + d.level / 2.0);
  const std::int64_t nsim = d.nsim;

  std::vector<detail::RepRecord> records(static_cast<std::size_t>(nsim));
  std::atomic<std::int64_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    std::vector<std::uint8_t> r, w;
    Fit fit;
    VarianceWorkspace ws;
    try {
      for (;;) {
        const std::int64_t s = next.fetch_add(1, std::memory_order_relaxed);
        if (s >= nsim) break;
        RandomStream rs(derive_stream_seed(master_seed, kRepStreamBase + static_cast<std::uint64_t>(s)));
        draw_sampling_into(pop, d.sampling, rs, r);
        draw_assignment_into(pop, d.assignment, rs, w);
        detail::RepRecord& rec = records[static_cast<std::size_t>(s)];
        try {
          fit_into(pop, r, w, fit);
        } catch (const DegenerateDrawError&) {
          continue;  // record stays unused
        }
        const VarianceSet v = estimate_variances(fit, pop, ws);
        const std::array<double, kNumEstimators> vs = {v.ehw, v.lzg, v.lzh, v.cgm, v.cgm2};
        rec.used = true;
        rec.clamped = v.cgm_clamped;
        const double inv_nobs = 1.0 / static_cast<double>(fit.n_obs);
        for (int k = 0; k < kNumEstimators; ++k) {
          const double var_tau = vs[static_cast<std::size_t>(k)] * inv_nobs;
          rec.var_tau[static_cast<std::size_t>(k)] = var_tau;
          const double half = z * std::sqrt(std::max(0.0, var_tau));
          rec.covered[static_cast<std::size_t>(k)] =
              fit.tau_hat - half <= tau && tau <= fit.tau_hat + half;
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
      next.store(nsim, std::memory_order_relaxed);  // stop remaining work
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers) - 1);
    for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  DesignResult out;
  out.name = d.name;
  out.nsim = nsim;
  out.master_seed = master_seed;
  std::array<KahanSum, kNumEstimators> var_sum;
  std::array<std::int64_t, kNumEstimators> cover_count{};
  for (const detail::RepRecord& rec : records) {
    if (!rec.used) continue;
    ++out.used;
    if (rec.clamped) ++out.clamped;
    for (int k = 0; k < kNumEstimators; ++k) {
      var_sum[static_cast<std::size_t>(k)].add(rec.var_tau[static_cast<std::size_t>(k)]);
      cover_count[static_cast<std::size_t>(k)] += rec.covered[static_cast<std::size_t>(k)] ? 1 : 0;
    }
  }
  out.degenerate = nsim - out.used;
  if (2 * out.degenerate > nsim)
    throw DesignFailureError("run_design: more than half of the replications were degenerate");
  for (int k = 0; k < kNumEstimators; ++k) {
    out.coverage[static_cast<std::size_t>(k)] =
        static_cast<double>(cover_count[static_cast<std::size_t>(k)]) / static_cast<double>(out.used);
    out.mean_variance[static_cast<std::size_t>(k)] =
        var_sum[static_cast<std::size_t>(k)].value() / static_cast<double>(out.used);
  }
  return out;
}

// The eight stock scenarios exercised by the command line driver and the
// acceptance suite.
inline const std::vector<Design>& design_registry() {
  static const std::vector<Design> designs = [] {
    const double r = std::sqrt(0.5);
    const GeometrySpec square = GeometrySpec::balanced(1000, 1000, 1);
    std::vector<Design> ds;

    Design d1;
    d1.name = "D1";
    d1.geometry = square;
    d1.effects = EffectScheme{EffectVariant::Same};
    d1.sampling = SamplingSpec::full();
    d1.assignment = AssignmentSpec::multiway_and(r, r);
    d1.thin_fraction = 0.01;
    ds.push_back(d1);

    Design d2 = d1;
    d2.name = "D2";
    d2.effects = EffectScheme{EffectVariant::Hvar};
    ds.push_back(d2);

    Design d3;
    d3.name = "D3";
    d3.geometry = square;
    d3.effects = EffectScheme{EffectVariant::Same};
    d3.sampling = SamplingSpec::multiway_and(0.25, 0.25, 0.25);
    d3.assignment = AssignmentSpec::iid(0.5);
    ds.push_back(d3);

    Design d4;
    d4.name = "D4";
    d4.geometry = square;
    d4.effects = EffectScheme{EffectVariant::Hvar};
    d4.sampling = SamplingSpec::oneway_g(0.05, 1.0);
    d4.assignment = AssignmentSpec::oneway_h(AssignDist::uniform01());
    ds.push_back(d4);

    Design d5 = d1;
    d5.name = "D5";
    d5.effects = EffectScheme{EffectVariant::Constant};
    ds.push_back(d5);

    Design d6;
    d6.name = "D6";
    d6.geometry = square;
    d6.effects = EffectScheme{EffectVariant::Hvar};
    d6.sampling = SamplingSpec::oneway_g(0.1, 1.0);
    d6.assignment = AssignmentSpec::iid(0.5);
    ds.push_back(d6);

    Design d7;
    d7.name = "D7";
    d7.geometry = square;
    d7.effects = EffectScheme{EffectVariant::Gvar};
    d7.sampling = SamplingSpec::full();
    d7.assignment = AssignmentSpec::oneway_h(AssignDist::uniform01());
    d7.thin_fraction = 0.01;
    ds.push_back(d7);

    Design d8;
    d8.name = "D8";
    d8.geometry = GeometrySpec::staircase(1000, 250);
    d8.effects = EffectScheme{EffectVariant::OddEven};
    d8.sampling = SamplingSpec::multiway_and(0.25, 0.25, 0.25);
    d8.assignment = AssignmentSpec::iid(0.5);
    ds.push_back(d8);

    return ds;
  }();
  return designs;
}

inline const Design& find_design(const std::string& name) {
  for (const Design& d : design_registry())
    if (d.name == name) return d;
  throw UnknownDesignError("unknown design: " + name);
}

}  // namespace mwclust
