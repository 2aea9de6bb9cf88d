#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mwclust/common.hpp"
#include "mwclust/design.hpp"

namespace mwclust {

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

struct ConfigEntry {
  std::string value;
  int line = 0;
  bool consumed = false;
};

// Parsed `[section] key = value` document with '#' / ';' comments.
class ConfigDoc {
 public:
  static ConfigDoc parse_text(const std::string& text) {
    ConfigDoc doc;
    std::istringstream in(text);
    std::string raw;
    std::string section;  // "" = top level
    int line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const std::size_t cut = raw.find_first_of("#;");
      std::string line = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        if (section.empty())
          throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
        doc.sections_[section];  // remember even if empty
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
      auto& sec = doc.sections_[section];
      if (sec.count(key))
        throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
      sec[key] = ConfigEntry{value, line_no, false};
    }
    return doc;
  }

  bool has_section(const std::string& name) const { return sections_.count(name) != 0; }

  ConfigEntry* find(const std::string& section, const std::string& key) {
    auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    k->second.consumed = true;
    return &k->second;
  }

  std::string require(const std::string& section, const std::string& key) {
    ConfigEntry* e = find(section, key);
    if (!e) {
      const std::string where = section.empty() ? "top level" : "section [" + section + "]";
      throw ConfigError("missing required key '" + key + "' in " + where);
    }
    return e->value;
  }

  // Every key must have been consumed by the schema walk.
  void reject_unconsumed() const {
    for (const auto& [section, keys] : sections_)
      for (const auto& [key, entry] : keys)
        if (!entry.consumed) {
          const std::string where = section.empty() ? key : section + "." + key;
          throw ConfigError("line " + std::to_string(entry.line) + ": unknown key '" + where + "'");
        }
  }

  void reject_unknown_sections(const std::vector<std::string>& known) const {
    for (const auto& [section, keys] : sections_) {
      if (section.empty()) continue;
      bool ok = false;
      for (const auto& k : known) ok = ok || k == section;
      if (!ok) throw ConfigError("unknown section [" + section + "]");
    }
  }

 private:
  std::map<std::string, std::map<std::string, ConfigEntry>> sections_;
};

inline double parse_real(const ConfigEntry& e, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(e.value, &used);
    if (used != e.value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(e.line) + ": '" + key + "' expects a number, got '" +
                      e.value + "'");
  }
}

inline std::int64_t parse_count(const ConfigEntry& e, const std::string& key) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(e.value, &used);
    if (used != e.value.size()) throw std::invalid_argument("trailing characters");
    return static_cast<std::int64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(e.line) + ": '" + key + "' expects an integer, got '" +
                      e.value + "'");
  }
}

inline double parse_probability(const ConfigEntry& e, const std::string& key) {
  const double v = parse_real(e, key);
  if (!(v >= 0.0 && v <= 1.0))
    throw ConfigError("line " + std::to_string(e.line) + ": '" + key + "' must lie in [0,1], got " +
                      e.value);
  return v;
}

inline double fetch_probability(ConfigDoc& doc, const std::string& section, const std::string& key) {
  ConfigEntry* e = doc.find(section, key);
  if (!e) throw ConfigError("missing required key '" + key + "' in section [" + section + "]");
  return parse_probability(*e, key);
}

}  // namespace detail

// Parses the structured design document. Unknown sections or keys are
// rejected so typos cannot silently fall back to defaults.
inline Design parse_design_config_text(const std::string& text) {
  using detail::ConfigDoc;
  ConfigDoc doc = ConfigDoc::parse_text(text);
  doc.reject_unknown_sections({"geometry", "effects", "sampling", "assignment", "thinning"});

  Design d;
  d.name = doc.require("", "name");

  if (detail::ConfigEntry* e = doc.find("", "nsim")) {
    d.nsim = detail::parse_count(*e, "nsim");
    if (d.nsim < 1) throw ConfigError("line " + std::to_string(e->line) + ": nsim must be at least 1");
  }
  if (detail::ConfigEntry* e = doc.find("", "level")) {
    d.level = detail::parse_real(*e, "level");
    if (!(d.level > 0.0 && d.level < 1.0))
      throw ConfigError("line " + std::to_string(e->line) + ": level must lie in (0,1)");
  }

  // [geometry]
  {
    const std::string kind = doc.require("geometry", "kind");
    if (kind == "balanced") {
      auto dim = [&](const char* key) {
        detail::ConfigEntry* e = doc.find("geometry", key);
        if (!e) throw ConfigError("balanced geometry requires key '" + std::string(key) + "'");
        const std::int64_t v = detail::parse_count(*e, key);
        if (v < 1)
          throw ConfigError("line " + std::to_string(e->line) + ": '" + key + "' must be at least 1");
        return v;
      };
      d.geometry = GeometrySpec::balanced(static_cast<std::int32_t>(dim("g")),
                                          static_cast<std::int32_t>(dim("h")), dim("per_cell"));
    } else if (kind == "staircase") {
      detail::ConfigEntry* em = doc.find("geometry", "m");
      detail::ConfigEntry* em0 = doc.find("geometry", "m0");
      if (!em || !em0) throw ConfigError("staircase geometry requires keys 'm' and 'm0'");
      const std::int64_t m = detail::parse_count(*em, "m");
      const std::int64_t m0 = detail::parse_count(*em0, "m0");
      if (m < 4 || m % 2 != 0)
        throw ConfigError("line " + std::to_string(em->line) + ": 'm' must be even and at least 4");
      if (m0 < 1) throw ConfigError("line " + std::to_string(em0->line) + ": 'm0' must be at least 1");
      d.geometry = GeometrySpec::staircase(static_cast<std::int32_t>(m), m0);
    } else {
      throw ConfigError("geometry kind must be 'balanced' or 'staircase', got '" + kind + "'");
    }
  }

  // [effects]
  {
    const std::string variant = doc.require("effects", "variant");
    try {
      d.effects.variant = effect_variant_from_string(variant);
    } catch (const ArgumentError& err) {
      throw ConfigError(std::string("effects: ") + err.what());
    }
    detail::ConfigEntry* ev = doc.find("effects", "noise_variance");
    detail::ConfigEntry* es = doc.find("effects", "noise_sd");
    if (ev && es) throw ConfigError("effects: give either noise_variance or noise_sd, not both");
    if (ev) {
      d.effects.noise = detail::parse_real(*ev, "noise_variance");
      d.effects.noise_is_sd = false;
    } else if (es) {
      d.effects.noise = detail::parse_real(*es, "noise_sd");
      d.effects.noise_is_sd = true;
    }
    if (d.effects.noise < 0.0) throw ConfigError("effects: noise must be non-negative");
  }

  // [sampling]
  {
    const std::string kind = doc.require("sampling", "kind");
    if (kind == "full") {
      d.sampling = SamplingSpec::full();
    } else if (kind == "iid") {
      d.sampling = SamplingSpec::iid(detail::fetch_probability(doc, "sampling", "p"));
    } else if (kind == "oneway_g") {
      const double q = detail::fetch_probability(doc, "sampling", "q");
      const double p = detail::fetch_probability(doc, "sampling", "p");
      d.sampling = SamplingSpec::oneway_g(q, p);
    } else if (kind == "multiway_and") {
      const double a = detail::fetch_probability(doc, "sampling", "a");
      const double b = detail::fetch_probability(doc, "sampling", "b");
      const double p = detail::fetch_probability(doc, "sampling", "p");
      d.sampling = SamplingSpec::multiway_and(a, b, p);
    } else {
      throw ConfigError("sampling kind must be full|iid|oneway_g|multiway_and, got '" + kind + "'");
    }
  }

  // [assignment]
  {
    const std::string kind = doc.require("assignment", "kind");
    if (kind == "iid") {
      d.assignment = AssignmentSpec::iid(detail::fetch_probability(doc, "assignment", "mu"));
    } else if (kind == "oneway_h") {
      const std::string dist = doc.require("assignment", "dist");
      if (dist == "uniform01") {
        d.assignment = AssignmentSpec::oneway_h(AssignDist::uniform01());
      } else if (dist == "two_point") {
        const double v0 = detail::fetch_probability(doc, "assignment", "v0");
        const double v1 = detail::fetch_probability(doc, "assignment", "v1");
        const double p1 = detail::fetch_probability(doc, "assignment", "p1");
        d.assignment = AssignmentSpec::oneway_h(AssignDist::two_point(v0, v1, p1));
      } else {
        throw ConfigError("assignment dist must be uniform01|two_point, got '" + dist + "'");
      }
    } else if (kind == "multiway_and") {
      const double pa = detail::fetch_probability(doc, "assignment", "p_a");
      const double pb = detail::fetch_probability(doc, "assignment", "p_b");
      d.assignment = AssignmentSpec::multiway_and(pa, pb);
    } else {
      throw ConfigError("assignment kind must be iid|oneway_h|multiway_and, got '" + kind + "'");
    }
  }

  // [thinning]
  if (doc.has_section("thinning")) {
    detail::ConfigEntry* e = doc.find("thinning", "fraction");
    if (!e) throw ConfigError("section [thinning] requires key 'fraction'");
    d.thin_fraction = detail::parse_real(*e, "fraction");
    if (!(d.thin_fraction > 0.0 && d.thin_fraction <= 1.0))
      throw ConfigError("line " + std::to_string(e->line) + ": fraction must lie in (0,1]");
  }

  doc.reject_unconsumed();
  return d;
}

inline Design parse_design_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_design_config_text(buf.str());
}

namespace detail {

inline std::string real_repr(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Canonical document for a Design; parse(serialize(d)) == d.
inline std::string serialize_design_config(const Design& d) {
  std::ostringstream out;
  out << "name = " << d.name << "\n";
  out << "nsim = " << d.nsim << "\n";
  out << "level = " << detail::real_repr(d.level) << "\n\n";

  out << "[geometry]\n";
  if (d.geometry.kind == GeometrySpec::Kind::Balanced) {
    out << "kind = balanced\n";
    out << "g = " << d.geometry.g << "\n";
    out << "h = " << d.geometry.h << "\n";
    out << "per_cell = " << d.geometry.per_cell << "\n";
  } else {
    out << "kind = staircase\n";
    out << "m = " << d.geometry.m << "\n";
    out << "m0 = " << d.geometry.m0 << "\n";
  }

  out << "\n[effects]\n";
  out << "variant = " << to_string(d.effects.variant) << "\n";
  out << (d.effects.noise_is_sd ? "noise_sd = " : "noise_variance = ")
      << detail::real_repr(d.effects.noise) << "\n";

  out << "\n[sampling]\n";
  switch (d.sampling.kind) {
    case SamplingSpec::Kind::Full: out << "kind = full\n"; break;
    case SamplingSpec::Kind::IID:
      out << "kind = iid\n";
      out << "p = " << detail::real_repr(d.sampling.p) << "\n";
      break;
    case SamplingSpec::Kind::OneWayG:
      out << "kind = oneway_g\n";
      out << "q = " << detail::real_repr(d.sampling.q) << "\n";
      out << "p = " << detail::real_repr(d.sampling.p) << "\n";
      break;
    case SamplingSpec::Kind::MultiwayAND:
      out << "kind = multiway_and\n";
      out << "a = " << detail::real_repr(d.sampling.a) << "\n";
      out << "b = " << detail::real_repr(d.sampling.b) << "\n";
      out << "p = " << detail::real_repr(d.sampling.p) << "\n";
      break;
  }

  out << "\n[assignment]\n";
  switch (d.assignment.kind) {
    case AssignmentSpec::Kind::IID:
      out << "kind = iid\n";
      out << "mu = " << detail::real_repr(d.assignment.mu) << "\n";
      break;
    case AssignmentSpec::Kind::OneWayH:
      out << "kind = oneway_h\n";
      if (d.assignment.dist.kind == AssignDist::Kind::Uniform01) {
        out << "dist = uniform01\n";
      } else {
        out << "dist = two_point\n";
        out << "v0 = " << detail::real_repr(d.assignment.dist.v0) << "\n";
        out << "v1 = " << detail::real_repr(d.assignment.dist.v1) << "\n";
        out << "p1 = " << detail::real_repr(d.assignment.dist.p1) << "\n";
      }
      break;
    case AssignmentSpec::Kind::MultiwayAND:
      out << "kind = multiway_and\n";
      out << "p_a = " << detail::real_repr(d.assignment.p_a) << "\n";
      out << "p_b = " << detail::real_repr(d.assignment.p_b) << "\n";
      break;
  }

  if (d.thin_fraction < 1.0) {
    out << "\n[thinning]\n";
    out << "fraction = " << detail::real_repr(d.thin_fraction) << "\n";
  }
  return out.str();
}

}  // namespace mwclust
