#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "mwclust/design.hpp"

namespace mwclust {

inline constexpr const char* kTableColumns[] = {
    "design", "EHWCov", "LZGCov", "LZHCov", "CGMCov",     "CGM2Cov", "EHWVar", "LZGVar",
    "LZHVar", "CGMVar", "CGM2Var", "degenerate", "clamped", "nsim",    "seed"};
inline constexpr int kNumTableColumns = 15;

namespace detail {

inline std::string coverage_repr(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

inline std::string variance_repr(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);  // 4 significant digits
  return buf;
}

inline std::vector<std::string> result_row(const DesignResult& r) {
  std::vector<std::string> row;
  row.reserve(kNumTableColumns);
  row.push_back(r.name);
  for (int k = 0; k < kNumEstimators; ++k)
    row.push_back(coverage_repr(r.coverage[static_cast<std::size_t>(k)]));
  for (int k = 0; k < kNumEstimators; ++k)
    row.push_back(variance_repr(r.mean_variance[static_cast<std::size_t>(k)]));
  row.push_back(std::to_string(r.degenerate));
  row.push_back(std::to_string(r.clamped));
  row.push_back(std::to_string(r.nsim));
  row.push_back(std::to_string(r.master_seed));
  return row;
}

}  // namespace detail

inline std::string render_csv(const std::vector<DesignResult>& results) {
  std::string out;
  for (int c = 0; c < kNumTableColumns; ++c) {
    if (c) out += ',';
    out += kTableColumns[c];
  }
  out += '\n';
  for (const DesignResult& r : results) {
    const std::vector<std::string> row = detail::result_row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += row[c];
    }
    out += '\n';
  }
  return out;
}

inline std::string render_markdown(const std::vector<DesignResult>& results) {
  std::string out = "|";
  for (int c = 0; c < kNumTableColumns; ++c) {
    out += ' ';
    out += kTableColumns[c];
    out += " |";
  }
  out += "\n|";
  for (int c = 0; c < kNumTableColumns; ++c) out += "---|";
  out += '\n';
  for (const DesignResult& r : results) {
    const std::vector<std::string> row = detail::result_row(r);
    out += '|';
    for (const std::string& cell : row) {
      out += ' ';
      out += cell;
      out += " |";
    }
    out += '\n';
  }
  return out;
}

}  // namespace mwclust
