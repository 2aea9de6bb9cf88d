// Command-line driver: design execution, table emission, verification verbs.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mwclust/mwclust.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string describe(const mwclust::SamplingSpec& s) {
  char buf[96];
  switch (s.kind) {
    case mwclust::SamplingSpec::Kind::Full: return "full";
    case mwclust::SamplingSpec::Kind::IID:
      std::snprintf(buf, sizeof(buf), "iid(p=%g)", s.p);
      return buf;
    case mwclust::SamplingSpec::Kind::OneWayG:
      std::snprintf(buf, sizeof(buf), "oneway_g(q=%g, p=%g)", s.q, s.p);
      return buf;
    case mwclust::SamplingSpec::Kind::MultiwayAND:
      std::snprintf(buf, sizeof(buf), "multiway_and(a=%g, b=%g, p=%g)", s.a, s.b, s.p);
      return buf;
  }
  return "?";
}

std::string describe(const mwclust::AssignmentSpec& a) {
  char buf[96];
  switch (a.kind) {
    case mwclust::AssignmentSpec::Kind::IID:
      std::snprintf(buf, sizeof(buf), "iid(mu=%g)", a.mu);
      return buf;
    case mwclust::AssignmentSpec::Kind::OneWayH:
      if (a.dist.kind == mwclust::AssignDist::Kind::Uniform01) return "oneway_h(uniform01)";
      std::snprintf(buf, sizeof(buf), "oneway_h(two_point(%g, %g; p1=%g))", a.dist.v0, a.dist.v1,
                    a.dist.p1);
      return buf;
    case mwclust::AssignmentSpec::Kind::MultiwayAND:
      std::snprintf(buf, sizeof(buf), "multiway_and(p_a=%g, p_b=%g)", a.p_a, a.p_b);
      return buf;
  }
  return "?";
}

std::string describe(const mwclust::GeometrySpec& g) {
  char buf[96];
  if (g.kind == mwclust::GeometrySpec::Kind::Balanced) {
    std::snprintf(buf, sizeof(buf), "balanced(%d x %d x %lld)", g.g, g.h,
                  static_cast<long long>(g.per_cell));
  } else {
    std::snprintf(buf, sizeof(buf), "staircase(m=%d, m0=%lld)", g.m, static_cast<long long>(g.m0));
  }
  return buf;
}

// A design argument is either a registry name or a config-file path.
mwclust::Design resolve_design(const std::string& arg) {
  for (const mwclust::Design& d : mwclust::design_registry())
    if (d.name == arg) return d;
  if (std::filesystem::exists(arg)) return mwclust::parse_design_config(arg);
  throw mwclust::UnknownDesignError("unknown design: " + arg);
}

std::vector<mwclust::Design> resolve_design_list(const std::string& arg) {
  std::vector<mwclust::Design> out;
  if (arg == "all") {
    out = mwclust::design_registry();
    return out;
  }
  std::stringstream ss(arg);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    if (!piece.empty()) out.push_back(resolve_design(piece));
  }
  if (out.empty()) throw mwclust::UnknownDesignError("no design named by: " + arg);
  return out;
}

void print_regularity(const mwclust::Population& pop) {
  const mwclust::RegularityReport rep = mwclust::regularity_report(pop);
  std::printf("regularity G: clusters=%lld max=%lld max^2/n=%.6g sum^2/n=%.6g\n",
              static_cast<long long>(rep.g.clusters), static_cast<long long>(rep.g.max_size),
              rep.g.max_sq_over_n, rep.g.sum_sq_over_n);
  std::printf("regularity H: clusters=%lld max=%lld max^2/n=%.6g sum^2/n=%.6g\n",
              static_cast<long long>(rep.h.clusters), static_cast<long long>(rep.h.max_size),
              rep.h.max_sq_over_n, rep.h.sum_sq_over_n);
}

int cmd_run(const std::string& design_arg, std::int64_t nsim, std::uint64_t seed, int workers,
            const std::string& out_path, const std::string& format) {
  std::vector<mwclust::Design> designs = resolve_design_list(design_arg);
  std::vector<mwclust::DesignResult> results;
  results.reserve(designs.size());
  for (mwclust::Design& d : designs) {
    if (nsim > 0) d.nsim = nsim;
    results.push_back(mwclust::run_design(d, seed, workers));
  }
  const std::string table =
      format == "md" ? mwclust::render_markdown(results) : mwclust::render_csv(results);
  if (out_path.empty()) {
    std::fputs(table.c_str(), stdout);
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw mwclust::Error("cannot write output file: " + out_path);
    out << table;
  }
  return kExitOk;
}

int cmd_list_designs() {
  for (const mwclust::Design& d : mwclust::design_registry()) {
    std::printf("%-4s %-28s effects=%-9s sampling=%-32s assignment=%-34s thin=%g nsim=%lld\n",
                d.name.c_str(), describe(d.geometry).c_str(), mwclust::to_string(d.effects.variant),
                describe(d.sampling).c_str(), describe(d.assignment).c_str(), d.thin_fraction,
                static_cast<long long>(d.nsim));
  }
  return kExitOk;
}

int cmd_verify(std::int64_t reps, std::uint64_t seed) {
  using mwclust::CheckResult;
  std::vector<CheckResult> checks;
  checks.push_back(mwclust::check_moment_suite(reps, mwclust::derive_stream_seed(seed, 11)));
  checks.push_back(mwclust::check_oracle_equivalence(200, mwclust::derive_stream_seed(seed, 12)));
  checks.push_back(mwclust::check_staircase_grid());
  checks.push_back(mwclust::check_identity_fuzz(10000, mwclust::derive_stream_seed(seed, 13)));
  checks.push_back(mwclust::check_dominance(500, mwclust::derive_stream_seed(seed, 14)));
  checks.push_back(mwclust::check_clt(mwclust::derive_stream_seed(seed, 15)));
  checks.push_back(mwclust::check_determinism(mwclust::derive_stream_seed(seed, 16)));

  bool all = true;
  for (const CheckResult& c : checks) {
    all = all && c.pass;
    std::printf("[%s] %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
  }

  std::printf("\ncluster-size diagnostics per stock design (seed %llu):\n",
              static_cast<unsigned long long>(seed));
  for (const mwclust::Design& d : mwclust::design_registry()) {
    const mwclust::Population pop = mwclust::build_design_population(d, seed);
    std::printf("-- %s: n=%lld tau=%.6g\n", d.name.c_str(), static_cast<long long>(pop.size()),
                pop.tau());
    print_regularity(pop);
  }
  return all ? kExitOk : kExitRuntime;
}

int cmd_theory(const std::string& design_arg, std::uint64_t seed) {
  const mwclust::Design d = resolve_design(design_arg);
  const mwclust::Population pop = mwclust::build_design_population(d, seed);
  const mwclust::TheoreticalVariances t =
      mwclust::limit_variances(pop, d.sampling, d.assignment);
  std::printf("design %s (population seed %llu)\n", d.name.c_str(),
              static_cast<unsigned long long>(seed));
  std::printf("population: n=%lld tau=%.9g alpha=%.9g\n", static_cast<long long>(pop.size()),
              pop.tau(), pop.alpha());
  std::printf("v       = %.9e\n", t.v);
  std::printf("v_ehw   = %.9e   gap_ehw  = %+.9e\n", t.v_ehw, t.gap_ehw);
  std::printf("v_lzg   = %.9e   gap_lzg  = %+.9e\n", t.v_lzg, t.gap_lzg);
  std::printf("v_lzh   = %.9e\n", t.v_lzh);
  std::printf("v_cgm   = %.9e   gap_cgm  = %+.9e\n", t.v_cgm, t.gap_cgm);
  std::printf("v_cgm2  = %.9e   gap_cgm2 = %+.9e\n", t.v_cgm2, t.gap_cgm2);
  print_regularity(pop);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulation laboratory for multiway clustered sampling and assignment"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run a design and emit its results table");
  std::string run_design_arg;
  std::int64_t run_nsim = 0;
  std::uint64_t run_seed = 42;
  int run_workers = 1;
  std::string run_out;
  std::string run_format = "csv";
  run->add_option("--design", run_design_arg,
                  "registry name, comma list, 'all', or config file path")
      ->required();
  run->add_option("--nsim", run_nsim, "override the design's replication count")
      ->check(CLI::PositiveNumber);
  run->add_option("--seed", run_seed, "master seed")->envname("MWCLUST_SEED");
  run->add_option("--workers", run_workers, "worker thread count")->envname("MWCLUST_WORKERS");
  run->add_option("--out", run_out, "output file (default stdout)");
  run->add_option("--format", run_format, "table format")
      ->check(CLI::IsMember({"csv", "md"}));

  // list-designs
  auto* list = app.add_subcommand("list-designs", "print the stock design registry");

  // verify
  auto* verify = app.add_subcommand("verify", "run the oracle suite and regularity reports");
  std::int64_t verify_reps = 1000000;
  std::uint64_t verify_seed = 42;
  verify->add_option("--reps", verify_reps, "Monte Carlo repetitions for the moment suite")
      ->check(CLI::PositiveNumber);
  verify->add_option("--seed", verify_seed, "master seed")->envname("MWCLUST_SEED");

  // theory
  auto* theory = app.add_subcommand("theory", "print limit variances and gaps for a design");
  std::string theory_design_arg;
  std::uint64_t theory_seed = 42;
  theory->add_option("--design", theory_design_arg, "registry name or config file path")->required();
  theory->add_option("--seed", theory_seed, "master seed")->envname("MWCLUST_SEED");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(run_design_arg, run_nsim, run_seed, run_workers, run_out,
                                      run_format);
    if (list->parsed()) return cmd_list_designs();
    if (verify->parsed()) return cmd_verify(verify_reps, verify_seed);
    if (theory->parsed()) return cmd_theory(theory_design_arg, theory_seed);
  } catch (const mwclust::UnknownDesignError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const mwclust::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const mwclust::ArgumentError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const mwclust::InvalidMechanismError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const mwclust::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
