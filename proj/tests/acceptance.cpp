// Acceptance battery: one pass/fail line per criterion, exit 0 iff all pass.
// All thresholds and seeds are pinned here on purpose; do not parameterize.
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "mwclust/checks.hpp"
#include "mwclust/design.hpp"
#include "mwclust/rng.hpp"
#include "mwclust/table.hpp"
#include "mwclust/variance.hpp"

using namespace mwclust;

namespace {

constexpr std::uint64_t kSeed = 42;
constexpr std::int64_t kNsim = 1000;

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void report(const CheckResult& r) { report(r.name, r.pass, r.detail); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void coverage_at_least(const DesignResult& r, int est, double bound) {
  const std::string name = r.name + " " + kEstimatorNames[est] + " coverage floor";
  report(name, r.coverage[est] >= bound,
         fmt("%.4f", r.coverage[est]) + " >= " + fmt("%.4f", bound));
}

void coverage_at_most(const DesignResult& r, int est, double bound) {
  const std::string name = r.name + " " + kEstimatorNames[est] + " coverage ceiling";
  report(name, r.coverage[est] <= bound,
         fmt("%.4f", r.coverage[est]) + " <= " + fmt("%.4f", bound));
}

}  // namespace

int main() {
  std::printf("acceptance battery: seed=%llu, nsim=%lld\n",
              static_cast<unsigned long long>(kSeed), static_cast<long long>(kNsim));
  std::fflush(stdout);

  report(check_staircase_grid());
  report(check_moment_suite(1000000, derive_stream_seed(kSeed, 11)));
  report(check_oracle_equivalence(200, derive_stream_seed(kSeed, 12)));
  report(check_identity_fuzz(10000, derive_stream_seed(kSeed, 13)));
  report(check_dominance(500, derive_stream_seed(kSeed, 14)));
  report(check_clt(derive_stream_seed(kSeed, 15)));
  report(check_determinism(derive_stream_seed(kSeed, 16)));

  {
    const Design d8 = find_design("D8");
    const Population pop = build_design_population(d8, kSeed);
    const TheoreticalVariances tv = limit_variances(pop, d8.sampling, d8.assignment);
    const double expected = -1.953125;
    const bool pass = tv.gap_cgm < 0.0 && std::fabs(tv.gap_cgm - expected) <= 1e-6;
    report("D8 neighbor-overlap gap", pass,
           fmt("%.9f", tv.gap_cgm) + " ~ " + fmt("%.9f", expected) + " and < 0");
  }

  std::vector<DesignResult> results;
  auto run = [&results](const std::string& name) -> const DesignResult& {
    Design d = find_design(name);
    d.nsim = kNsim;
    results.push_back(run_design(d, kSeed));
    std::printf("  (ran %s)\n", name.c_str());
    std::fflush(stdout);
    return results.back();
  };

  constexpr int EHW = 0, LZG = 1, LZH = 2, CGM = 3, CGM2 = 4;

  {
    const DesignResult& r = run("D1");
    coverage_at_least(r, CGM, 0.97);
    coverage_at_most(r, EHW, 0.87);
  }
  {
    const DesignResult& r = run("D3");
    coverage_at_most(r, LZG, 0.94);
    coverage_at_most(r, LZH, 0.94);
    coverage_at_most(r, EHW, 0.43);
    coverage_at_least(r, CGM, 0.92);
  }
  {
    const DesignResult& r = run("D4");
    coverage_at_most(r, LZG, 0.97);
    coverage_at_most(r, LZH, 0.98);
    coverage_at_least(r, CGM, 0.94);
  }
  {
    const DesignResult& r = run("D5");
    coverage_at_least(r, CGM, 0.93);
    coverage_at_most(r, CGM, 0.97);
    coverage_at_least(r, CGM2, 0.99);
  }
  {
    const DesignResult& r = run("D7");
    const double ratio = r.mean_variance[LZG] / r.mean_variance[LZH];
    report("D7 row-vs-column variance ratio", ratio >= 3.0 && ratio <= 5.0,
           fmt("%.4f", ratio) + " in [3, 5]");
  }
  {
    const DesignResult& r = run("D8");
    coverage_at_most(r, CGM, 0.945);
    // For this banded geometry under and-gated sampling (cell/row/column
    // excess-correlation coefficients 15/3/3 against band sums 10/4/4 per unit
    // of band mass), the downward bias of the cgm limit is capped at 2/114 of
    // the design variance for every band size, which puts the expected cgm
    // coverage near 0.948. The ceiling above asks for more depression than the
    // geometry can produce on average, so it can only pass by seed luck; it is
    // kept pinned rather than tuned to the engine.
    std::printf("  note: expected CGM coverage for this geometry is ~0.948 "
                "(variance deficit capped at 2/114), so the 0.945 ceiling is "
                "not reachable in expectation\n");
    std::fflush(stdout);
    coverage_at_least(r, CGM2, 0.98);
  }

  std::printf("\n%s\n", render_csv(results).c_str());
  std::printf("%s\n", failures == 0 ? "acceptance: ALL PASS" : "acceptance: FAILURES");
  std::fflush(stdout);
  return failures == 0 ? 0 : 1;
}
