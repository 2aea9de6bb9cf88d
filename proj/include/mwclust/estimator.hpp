#pragma once

#include <cstdint>
#include <vector>

#include "mwclust/common.hpp"
#include "mwclust/mechanisms.hpp"
#include "mwclust/population.hpp"

namespace mwclust {

// Difference-in-means fit over the observed units (OLS of the realized
// outcome on the treatment indicator with an intercept). eta_hat aligns with
// `observed`: U_hat/b1_hat on treated units, -U_hat/b0_hat on controls.
struct Fit {
  double tau_hat = 0.0;
  double alpha_hat = 0.0;
  std::int64_t n = 0;      // population size
  std::int64_t n_obs = 0;  // observed units
  std::int64_t n1 = 0;     // observed treated
  std::int64_t n0 = 0;     // observed controls
  double b1_hat = 0.0;     // n1 / n
  double b0_hat = 0.0;     // n0 / n
  std::vector<std::int64_t> observed;
  std::vector<double> eta_hat;
};

inline void fit_into(const Population& pop, const std::vector<std::uint8_t>& r,
                     const std::vector<std::uint8_t>& w, Fit& out) {
  const std::int64_t n = pop.size();
  if (static_cast<std::int64_t>(r.size()) != n || static_cast<std::int64_t>(w.size()) != n)
    throw ArgumentError("fit: indicator length mismatch");

  out.observed.clear();
  out.eta_hat.clear();
  KahanSum sum1, sum0;
  std::int64_t n1 = 0, n0 = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    if (!r[i]) continue;
    out.observed.push_back(i);
    if (w[i]) {
      sum1.add(pop.y1(i));
      ++n1;
    } else {
      sum0.add(pop.y0(i));
      ++n0;
    }
  }
  if (n1 == 0 || n0 == 0)
    throw DegenerateDrawError(n1 == 0 ? "no treated units observed" : "no control units observed");

  out.n = n;
  out.n_obs = n1 + n0;
  out.n1 = n1;
  out.n0 = n0;
  out.alpha_hat = sum0.value() / static_cast<double>(n0);
  out.tau_hat = sum1.value() / static_cast<double>(n1) - out.alpha_hat;
  out.b1_hat = static_cast<double>(n1) / static_cast<double>(n);
  out.b0_hat = static_cast<double>(n0) / static_cast<double>(n);

  const double inv_b1 = static_cast<double>(n) / static_cast<double>(n1);
  const double inv_b0 = static_cast<double>(n) / static_cast<double>(n0);
  out.eta_hat.resize(out.observed.size());
  for (std::size_t k = 0; k < out.observed.size(); ++k) {
    const std::int64_t i = out.observed[k];
    if (w[i]) {
      const double u = pop.y1(i) - out.alpha_hat - out.tau_hat;
      out.eta_hat[k] = u * inv_b1;
    } else {
      const double u = pop.y0(i) - out.alpha_hat;
      out.eta_hat[k] = -u * inv_b0;
    }
  }
}

inline Fit fit(const Population& pop, const std::vector<std::uint8_t>& r,
               const std::vector<std::uint8_t>& w) {
  Fit f;
  fit_into(pop, r, w, f);
  return f;
}

inline Fit fit(const Population& pop, const Draw& draw) { return fit(pop, draw.r, draw.w); }

// Population influence means: E[eta_i] = u1_i - u0_i, i.e. the unit's effect
// deviation from the average effect.
inline std::vector<double> eta_moments_population(const Population& pop) {
  std::vector<double> e(pop.size());
  for (std::int64_t i = 0; i < pop.size(); ++i) e[i] = pop.u1(i) - pop.u0(i);
  return e;
}

}  // namespace mwclust
