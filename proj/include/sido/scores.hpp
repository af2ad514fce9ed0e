#pragma once

// Per-account score records shared by the SIDO models and the baselines,
// and their CSV form:
//   account_id,role,server,phase,stat,scope,score,sd,sign_prob,category
// Missing numbers are written as NA.

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sido/csv.hpp"
#include "sido/error.hpp"
#include "sido/metametrics.hpp"
#include "sido/types.hpp"

namespace sido {

struct ScoreRecord {
  std::string account_id;
  CellKey key;  // key.scope distinguishes PLAYER/ALLY/ENEMY/.../BA/PM_*
  double score = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();
  double sign_prob = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_games = 0;

  bool has_score() const { return !std::isnan(score); }
  std::optional<meta::ImpactCategory> category() const {
    if (std::isnan(sign_prob)) return std::nullopt;
    return meta::categorize(sign_prob);
  }
};

inline constexpr std::string_view kScoreHeader =
    "account_id,role,server,phase,stat,scope,score,sd,sign_prob,category";

inline void write_scores_csv(std::ostream& os, std::span<const ScoreRecord> scores) {
  os << kScoreHeader << '\n';
  for (const auto& s : scores) {
    const auto cat = s.category();
    csv::write_row(os, {s.account_id, std::string(to_string(s.key.role)), std::string(to_string(s.key.server)),
                        std::string(to_string(s.key.phase)), std::string(to_string(s.key.stat)),
                        std::string(to_string(s.key.scope)), csv::format_double(s.score), csv::format_double(s.sd),
                        csv::format_double(s.sign_prob),
                        cat ? std::string(meta::category_name(*cat)) : std::string(csv::kMissing)});
  }
}

inline std::vector<ScoreRecord> read_scores_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || (line != kScoreHeader && line != std::string(kScoreHeader) + "\r")) {
    throw IoError("score file header must be " + std::string(kScoreHeader));
  }
  std::vector<ScoreRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \r") == std::string::npos) continue;
    const auto f = csv::split_line(line);
    if (f.size() != 10) throw IoError("score file line " + std::to_string(line_no) + " needs 10 fields");
    auto role = parse_enum<Role>(f[1]);
    auto server = parse_enum<Server>(f[2]);
    auto phase = parse_enum<Phase>(f[3]);
    auto stat = parse_enum<Stat>(f[4]);
    auto scope = parse_enum<Scope>(f[5]);
    if (!role || !server || !phase || !stat || !scope) {
      throw IoError("score file line " + std::to_string(line_no) + " has an unknown cell field");
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.push_back(ScoreRecord{f[0], CellKey{*role, *server, *phase, *stat, *scope},
                              csv::parse_double(f[6]).value_or(nan), csv::parse_double(f[7]).value_or(nan),
                              csv::parse_double(f[8]).value_or(nan), 0});
  }
  return out;
}

}  // namespace sido
