#pragma once

// Report emitters: meta-metric and comparison tables, SVG plots, and the
// run manifest. Every writer is deterministic for identical inputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "sido/analysis.hpp"
#include "sido/csv.hpp"
#include "sido/error.hpp"
#include "sido/models.hpp"
#include "sido/stats.hpp"
#include "sido/types.hpp"

namespace sido::report {

inline constexpr std::string_view kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Files and digests

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Tables

/// One meta-metric value in the layout role,server,time,method,scope,value.
/// A NaN value is emitted as the missing marker.
struct MetaRow {
  Role role{};
  Server server{};
  Phase phase{};
  Stat stat{};
  std::string method;
  Scope scope{};
  double value = std::numeric_limits<double>::quiet_NaN();
};

inline void write_meta_csv(std::ostream& os, std::span<const MetaRow> rows) {
  os << "role,server,time,method,scope,value\n";
  for (const auto& r : rows) {
    csv::write_row(os, {std::string(to_string(r.role)), std::string(to_string(r.server)),
                        std::string(time_label(r.phase)), r.method, std::string(to_string(r.scope)),
                        csv::format_double(r.value)});
  }
}

inline void write_comparisons_csv(std::ostream& os, std::span<const analysis::GroupComparison> rows) {
  os << "role,server,time,stat,method,scope,n_pro,n_nonpro,mean_pro,mean_nonpro,normalized_difference,t,df,"
        "p_raw,p_adjusted,status\n";
  for (const auto& c : rows) {
    csv::write_row(os, {std::string(to_string(c.key.role)), std::string(to_string(c.key.server)),
                        std::string(time_label(c.key.phase)), std::string(to_string(c.key.stat)), c.method,
                        std::string(to_string(c.key.scope)), std::to_string(c.n_pro), std::to_string(c.n_nonpro),
                        csv::format_double(c.mean_pro), csv::format_double(c.mean_nonpro),
                        csv::format_double(c.normalized_difference), csv::format_double(c.t),
                        csv::format_double(c.df), csv::format_double(c.p_raw), csv::format_double(c.p_adjusted),
                        c.skipped ? "SKIPPED_" + c.skip_reason : std::string("OK")});
  }
}

inline void write_differentials_csv(std::ostream& os, std::span<const analysis::Differential> rows) {
  os << "stat,time,n_games,fraction_positive\n";
  for (const auto& d : rows) {
    csv::write_row(os, {std::string(to_string(d.stat)), std::string(time_label(d.phase)),
                        std::to_string(d.differentials.size()), csv::format_double(d.fraction)});
  }
}

inline void write_profile_csv(std::ostream& os, std::span<const models::ProfileRow> rows) {
  os << "metric";
  for (Phase p : all_values<Phase>()) os << ',' << time_label(p);
  os << '\n';
  for (const auto& r : rows) {
    os << csv::escape(r.metric);
    for (double v : r.by_phase) os << ',' << csv::format_double(v);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Plots

/// Gaussian kernel density on `grid` with Silverman's bandwidth.
inline std::vector<double> kde(std::span<const double> values, std::span<const double> grid) {
  std::vector<double> out(grid.size(), 0.0);
  if (values.size() < 2) return out;
  const double sd = stats::sd(values);
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = stats::quantile_sorted(sorted, 0.75) - stats::quantile_sorted(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd > 0.0 ? sd : 1.0;
  const double h = 0.9 * spread * std::pow(static_cast<double>(values.size()), -0.2);
  const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double s = 0.0;
    for (double v : values) {
      const double z = (grid[g] - v) / h;
      s += std::exp(-0.5 * z * z);
    }
    out[g] = s * norm;
  }
  return out;
}

struct Series {
  std::string name;
  std::vector<double> values;
};

namespace detail {

inline constexpr std::array<std::string_view, 6> kPalette{"#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#6a4c93",
                                                          "#00798c"};

inline std::string num(double v) { return csv::format_fixed(v, 2); }

inline std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Overlaid density curves, one per series.
inline std::string svg_density(std::string_view title, std::span<const Series> series, std::string_view x_label) {
  constexpr double W = 640, H = 400, L = 60, R = 150, T = 40, B = 50;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : series) {
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) {
    lo = -1.0;
    hi = 1.0;
  }
  if (hi == lo) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  constexpr int kGrid = 128;
  std::vector<double> grid(kGrid);
  for (int i = 0; i < kGrid; ++i) grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (kGrid - 1);
  std::vector<std::vector<double>> dens;
  double ymax = 0.0;
  for (const auto& s : series) {
    dens.push_back(kde(s.values, grid));
    for (double d : dens.back()) ymax = std::max(ymax, d);
  }
  if (!(ymax > 0.0)) ymax = 1.0;
  auto px = [&](double x) { return L + (x - lo) / (hi - lo) * (W - L - R); };
  auto py = [&](double y) { return H - B - y / ymax * (H - T - B); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
     << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << detail::escape_xml(title)
     << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double x = lo + (hi - lo) * k / 4.0;
    os << "<text x=\"" << detail::num(px(x)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
       << csv::format_fixed(x, 1) << "</text>\n";
  }
  if (lo < 0.0 && hi > 0.0) {
    os << "<line x1=\"" << detail::num(px(0.0)) << "\" y1=\"" << T << "\" x2=\"" << detail::num(px(0.0))
       << "\" y2=\"" << H - B << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
     << detail::escape_xml(x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
     << ")\" text-anchor=\"middle\">density</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto color = detail::kPalette[s % detail::kPalette.size()];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (i) os << ' ';
      os << detail::num(px(grid[i])) << ',' << detail::num(py(dens[s][i]));
    }
    os << "\"/>\n";
    const double ly = T + 10 + 18.0 * static_cast<double>(s);
    os << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 32 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 38 << "\" y=\"" << ly + 4 << "\">" << detail::escape_xml(series[s].name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

struct Bar {
  std::string label;
  double value = 0.0;
  bool highlight = false;  // e.g. adjusted p < 0.05
};

/// Horizontal bars around a zero line; NaN bars are drawn as "NA".
inline std::string svg_bars(std::string_view title, std::span<const Bar> bars, std::string_view x_label) {
  constexpr double W = 640, L = 220, R = 30, T = 40, B = 50, row = 18;
  const double H = T + B + row * static_cast<double>(std::max<std::size_t>(bars.size(), 1));
  double lo = 0.0, hi = 0.0;
  for (const auto& b : bars) {
    if (std::isnan(b.value)) continue;
    lo = std::min(lo, b.value);
    hi = std::max(hi, b.value);
  }
  if (hi == lo) hi = lo + 1.0;
  auto px = [&](double x) { return L + (x - lo) / (hi - lo) * (W - L - R); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
     << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << detail::escape_xml(title)
     << "</text>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double y = T + row * static_cast<double>(i);
    os << "<text x=\"" << L - 6 << "\" y=\"" << y + 12 << "\" text-anchor=\"end\">"
       << detail::escape_xml(bars[i].label) << "</text>\n";
    if (std::isnan(bars[i].value)) {
      os << "<text x=\"" << detail::num(px(0.0)) << "\" y=\"" << y + 12 << "\" fill=\"#999\">NA</text>\n";
      continue;
    }
    const double x0 = px(std::min(0.0, bars[i].value)), x1 = px(std::max(0.0, bars[i].value));
    os << "<rect x=\"" << detail::num(x0) << "\" y=\"" << y + 3 << "\" width=\"" << detail::num(x1 - x0)
       << "\" height=\"" << row - 6 << "\" fill=\"" << (bars[i].highlight ? "#d1495b" : "#1b6ca8") << "\"/>\n";
  }
  os << "<line x1=\"" << detail::num(px(0.0)) << "\" y1=\"" << T << "\" x2=\"" << detail::num(px(0.0)) << "\" y2=\""
     << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double x = lo + (hi - lo) * k / 4.0;
    os << "<text x=\"" << detail::num(px(x)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
       << csv::format_fixed(x, 2) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
     << detail::escape_xml(x_label) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Manifest

struct Stage {
  std::string name;
  std::size_t input = 0;
  std::size_t output = 0;
  std::map<std::string, std::size_t> exclusions;

  std::size_t excluded() const {
    std::size_t s = 0;
    for (const auto& [k, v] : exclusions) s += v;
    return s;
  }
  bool conserved() const { return input == output + excluded(); }
};

struct InputDigest {
  std::string name;
  std::string sha256;
  std::size_t bytes = 0;
};

struct RunManifest {
  std::vector<InputDigest> inputs;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::vector<Stage> stages;       // chained: each input equals the previous output
  std::vector<Stage> cell_ledger;  // per-cell row accounting, each self-balancing
  std::vector<std::string> warnings;

  /// Every stage conserves rows and the chain links end to end.
  bool balanced() const {
    for (std::size_t i = 0; i < stages.size(); ++i) {
      if (!stages[i].conserved()) return false;
      if (i > 0 && stages[i].input != stages[i - 1].output) return false;
    }
    for (const auto& s : cell_ledger) {
      if (!s.conserved()) return false;
    }
    return true;
  }

  nlohmann::ordered_json to_json() const {
    auto stage_json = [](const Stage& s) {
      nlohmann::ordered_json j;
      j["name"] = s.name;
      j["input"] = s.input;
      j["output"] = s.output;
      j["exclusions"] = nlohmann::ordered_json::object();
      for (const auto& [k, v] : s.exclusions) j["exclusions"][k] = v;
      return j;
    };
    nlohmann::ordered_json j;
    j["version"] = kVersion;
    j["fit_format_version"] = 1;
    j["seed"] = seed;
    j["inputs"] = nlohmann::ordered_json::array();
    for (const auto& in : inputs) j["inputs"].push_back({{"name", in.name}, {"sha256", in.sha256}, {"bytes", in.bytes}});
    j["config"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config) j["config"][k] = v;
    j["stages"] = nlohmann::ordered_json::array();
    for (const auto& s : stages) j["stages"].push_back(stage_json(s));
    j["cells"] = nlohmann::ordered_json::array();
    for (const auto& s : cell_ledger) j["cells"].push_back(stage_json(s));
    j["balanced"] = balanced();
    j["warnings"] = warnings;
    return j;
  }
};

inline InputDigest digest_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return {path.filename().string(), sha256_hex(bytes), bytes.size()};
}

}  // namespace sido::report
