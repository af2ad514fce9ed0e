#pragma once

// Game telemetry ingestion: parsing, validation, filtering, phase
// differencing, standardization, and observation-table construction.

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sido/csv.hpp"
#include "sido/error.hpp"
#include "sido/stats.hpp"
#include "sido/types.hpp"

namespace sido::data {

/// Cumulative statistics at one snapshot minute.
struct Snapshot {
  double gold = 0.0;
  double dmg = 0.0;
  double dmg_taken = 0.0;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

enum class Field { GOLD, DMG, DMG_TAKEN };

inline double field_of(const Snapshot& s, Field f) {
  switch (f) {
    case Field::GOLD:
      return s.gold;
    case Field::DMG:
      return s.dmg;
    case Field::DMG_TAKEN:
      return s.dmg_taken;
  }
  return 0.0;
}

inline Field response_field(Stat stat) { return stat == Stat::GOLD ? Field::GOLD : Field::DMG; }

struct PlayerRow {
  std::string account_id;
  Team team = Team::BLUE;
  Role role = Role::TOP;
  std::string champion_id;
  bool win = false;
  Snapshot at7;
  Snapshot at15;
  std::optional<Snapshot> at25;

  friend bool operator==(const PlayerRow&, const PlayerRow&) = default;
};

struct GameRecord {
  std::string game_id;
  Server server = Server::NA;
  std::string patch;
  double duration_min = 0.0;
  Team winner = Team::BLUE;
  std::vector<PlayerRow> players;

  const PlayerRow* find(Team team, Role role) const {
    for (const auto& p : players) {
      if (p.team == team && p.role == role) return &p;
    }
    return nullptr;
  }

  friend bool operator==(const GameRecord&, const GameRecord&) = default;
};

// ---------------------------------------------------------------------------
// Phase differencing

/// Converts cumulative values at 7/15(/25) minutes into per-phase values.
inline std::vector<double> phase_difference(std::span<const double> cumulative) {
  if (cumulative.size() < 2 || cumulative.size() > 3) {
    throw ValidationError("SNAPSHOTS", "phase differencing needs 2 or 3 cumulative values");
  }
  std::vector<double> out{cumulative[0]};
  for (std::size_t i = 1; i < cumulative.size(); ++i) {
    if (cumulative[i] < cumulative[i - 1]) {
      throw ValidationError("NON_MONOTONE", "cumulative statistic decreases between snapshots");
    }
    out.push_back(cumulative[i] - cumulative[i - 1]);
  }
  return out;
}

/// Per-phase value of a field for one player, absent when the phase's
/// closing snapshot is missing.
inline std::optional<double> phase_value(const PlayerRow& row, Phase phase, Field field) {
  switch (phase) {
    case Phase::P0_7:
      return field_of(row.at7, field);
    case Phase::P7_15:
      return field_of(row.at15, field) - field_of(row.at7, field);
    case Phase::P15_25:
      if (!row.at25) return std::nullopt;
      return field_of(*row.at25, field) - field_of(row.at15, field);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Parsing and validation

/// Reason a game was rejected; `code` is one of the documented reason codes.
struct Rejection {
  std::string code;
  std::string message;
};

inline std::optional<Rejection> validate_game(const GameRecord& game) {
  if (game.players.size() != 10) {
    return Rejection{"PLAYER_COUNT", "expected 10 players, found " + std::to_string(game.players.size())};
  }
  if (!(game.duration_min >= 0.0)) return Rejection{"NEGATIVE", "duration_min must be nonnegative"};
  std::array<int, 2> team_size{};
  std::array<std::array<int, 5>, 2> role_count{};
  std::set<std::string> accounts;
  for (const auto& p : game.players) {
    ++team_size[static_cast<int>(p.team)];
    ++role_count[static_cast<int>(p.team)][static_cast<int>(p.role)];
    if (!accounts.insert(p.account_id).second) {
      return Rejection{"DUP_ACCOUNT", "account " + p.account_id + " appears twice"};
    }
  }
  if (team_size[0] != 5 || team_size[1] != 5) return Rejection{"TEAM_SIZE", "each team needs 5 players"};
  for (int t = 0; t < 2; ++t) {
    for (int r = 0; r < 5; ++r) {
      if (role_count[t][r] != 1) {
        return Rejection{"ROLE_DUP", std::string(to_string(static_cast<Team>(t))) + " has " +
                                          std::to_string(role_count[t][r]) + " " +
                                          std::string(to_string(static_cast<Role>(r)))};
      }
    }
  }
  const bool expect25 = game.duration_min >= 25.0;
  for (const auto& p : game.players) {
    if (p.win != (p.team == game.winner)) return Rejection{"WINNER", "player win flag disagrees with winner"};
    if (p.at25.has_value() != expect25) {
      return Rejection{"SNAPSHOT_25", "25-minute snapshot must be present iff duration_min >= 25"};
    }
    std::vector<Snapshot> snaps{p.at7, p.at15};
    if (p.at25) snaps.push_back(*p.at25);
    for (const auto& s : snaps) {
      if (!(s.gold >= 0 && s.dmg >= 0 && s.dmg_taken >= 0)) {
        return Rejection{"NEGATIVE", "negative statistic for " + p.account_id};
      }
    }
    for (std::size_t i = 1; i < snaps.size(); ++i) {
      if (snaps[i].gold < snaps[i - 1].gold || snaps[i].dmg < snaps[i - 1].dmg ||
          snaps[i].dmg_taken < snaps[i - 1].dmg_taken) {
        return Rejection{"NON_MONOTONE", "cumulative statistic decreases for " + p.account_id};
      }
    }
  }
  return std::nullopt;
}

struct LineIssue {
  std::size_t line = 0;
  std::string code;
  std::string message;
};

struct ParseResult {
  std::vector<GameRecord> games;
  std::vector<LineIssue> issues;
  std::size_t lines_read = 0;  // non-blank lines

  std::map<std::string, std::size_t> issue_counts() const {
    std::map<std::string, std::size_t> out;
    for (const auto& i : issues) ++out[i.code];
    return out;
  }
};

namespace detail {

template <class E>
E enum_field(const nlohmann::json& j, const char* key) {
  const auto text = j.at(key).get<std::string>();
  auto value = parse_enum<E>(text);
  if (!value) throw ValidationError("SCHEMA", std::string("bad value for '") + key + "': " + text);
  return *value;
}

inline Snapshot parse_snapshot(const nlohmann::json& j) {
  return Snapshot{j.at("gold").get<double>(), j.at("dmg").get<double>(), j.at("dmg_taken").get<double>()};
}

inline nlohmann::json snapshot_json(const Snapshot& s) {
  return {{"gold", s.gold}, {"dmg", s.dmg}, {"dmg_taken", s.dmg_taken}};
}

}  // namespace detail

/// Decodes one game object. Structural invariants are checked separately
/// by validate_game.
inline GameRecord game_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("SCHEMA", "game line is not a JSON object");
  try {
    GameRecord g;
    g.game_id = j.at("game_id").get<std::string>();
    g.server = detail::enum_field<Server>(j, "server");
    g.patch = j.at("patch").get<std::string>();
    g.duration_min = j.at("duration_min").get<double>();
    g.winner = detail::enum_field<Team>(j, "winner");
    for (const auto& pj : j.at("players")) {
      PlayerRow p;
      p.account_id = pj.at("account_id").get<std::string>();
      p.team = detail::enum_field<Team>(pj, "team");
      p.role = detail::enum_field<Role>(pj, "role");
      p.champion_id = pj.at("champion_id").get<std::string>();
      p.win = p.team == g.winner;
      const auto& snap = pj.at("snap");
      p.at7 = detail::parse_snapshot(snap.at("7"));
      p.at15 = detail::parse_snapshot(snap.at("15"));
      if (snap.contains("25") && !snap.at("25").is_null()) p.at25 = detail::parse_snapshot(snap.at("25"));
      g.players.push_back(std::move(p));
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("SCHEMA", e.what());
  }
}

inline nlohmann::json game_to_json(const GameRecord& g) {
  nlohmann::json players = nlohmann::json::array();
  for (const auto& p : g.players) {
    nlohmann::json snap{{"7", detail::snapshot_json(p.at7)}, {"15", detail::snapshot_json(p.at15)}};
    if (p.at25) snap["25"] = detail::snapshot_json(*p.at25);
    players.push_back({{"account_id", p.account_id},
                       {"team", to_string(p.team)},
                       {"role", to_string(p.role)},
                       {"champion_id", p.champion_id},
                       {"snap", snap}});
  }
  return {{"game_id", g.game_id},      {"server", to_string(g.server)},
          {"patch", g.patch},          {"duration_min", g.duration_min},
          {"winner", to_string(g.winner)}, {"players", players}};
}

/// Reads newline-delimited game records. Bad lines are reported, not fatal.
inline ParseResult parse_game_records(std::istream& in) {
  ParseResult result;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++result.lines_read;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      result.issues.push_back({line_no, "JSON", e.what()});
      continue;
    }
    try {
      GameRecord g = game_from_json(j);
      if (auto bad = validate_game(g)) {
        result.issues.push_back({line_no, bad->code, bad->message});
        continue;
      }
      if (!seen_ids.insert(g.game_id).second) {
        result.issues.push_back({line_no, "DUP_GAME", "game_id " + g.game_id + " already seen"});
        continue;
      }
      result.games.push_back(std::move(g));
    } catch (const ValidationError& e) {
      result.issues.push_back({line_no, e.code(), e.what()});
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Filters and selections

inline constexpr double kDisconnectDamageTaken = 500.0;

/// Drops games where any player took strictly less than `threshold` damage
/// by minute 7.
inline std::vector<GameRecord> filter_disconnects(std::span<const GameRecord> games,
                                                  double threshold = kDisconnectDamageTaken) {
  std::vector<GameRecord> out;
  for (const auto& g : games) {
    const bool disconnect =
        std::any_of(g.players.begin(), g.players.end(), [&](const PlayerRow& p) { return p.at7.dmg_taken < threshold; });
    if (!disconnect) out.push_back(g);
  }
  return out;
}

inline std::vector<GameRecord> filter_server(std::span<const GameRecord> games, Server server) {
  std::vector<GameRecord> out;
  for (const auto& g : games) {
    if (g.server == server) out.push_back(g);
  }
  return out;
}

/// Accounts with at least `min_games` games in `role`.
inline std::set<std::string> select_role_mains(std::span<const GameRecord> games, Role role, int min_games = 50) {
  if (min_games < 1) throw ValidationError("CONFIG", "min_games must be >= 1");
  std::map<std::string, int> counts;
  for (const auto& g : games) {
    for (const auto& p : g.players) {
      if (p.role == role) ++counts[p.account_id];
    }
  }
  std::set<std::string> out;
  for (const auto& [account, n] : counts) {
    if (n >= min_games) out.insert(account);
  }
  return out;
}

/// Champions played in `role` by at least `min_accounts` distinct accounts.
/// When `accounts` is given, only those accounts' games count.
inline std::set<std::string> select_champions(std::span<const GameRecord> games, Role role, int min_accounts = 30,
                                              const std::set<std::string>* accounts = nullptr) {
  if (min_accounts < 1) throw ValidationError("CONFIG", "min_accounts must be >= 1");
  std::map<std::string, std::set<std::string>> players_of;
  for (const auto& g : games) {
    for (const auto& p : g.players) {
      if (p.role != role) continue;
      if (accounts && !accounts->contains(p.account_id)) continue;
      players_of[p.champion_id].insert(p.account_id);
    }
  }
  std::set<std::string> out;
  for (const auto& [champion, who] : players_of) {
    if (static_cast<int>(who.size()) >= min_accounts) out.insert(champion);
  }
  return out;
}

/// The scored population of one role: role-main accounts restricted to
/// qualifying champions. Selection alternates the account and champion
/// thresholds until neither changes, so re-selecting on the retained rows
/// reproduces the same sets.
struct FocalSelection {
  Role role = Role::TOP;
  std::set<std::string> accounts;
  std::set<std::string> champions;
  int rounds = 0;

  bool contains(const PlayerRow& p) const {
    return p.role == role && accounts.contains(p.account_id) && champions.contains(p.champion_id);
  }
};

inline FocalSelection select_focal(std::span<const GameRecord> games, Role role, int min_games = 50,
                                   int min_accounts = 30) {
  FocalSelection sel;
  sel.role = role;
  sel.accounts = select_role_mains(games, role, min_games);
  sel.champions = select_champions(games, role, min_accounts, &sel.accounts);
  for (;;) {
    ++sel.rounds;
    std::map<std::string, int> counts;
    for (const auto& g : games) {
      for (const auto& p : g.players) {
        if (sel.contains(p)) ++counts[p.account_id];
      }
    }
    std::set<std::string> accounts;
    for (const auto& [a, n] : counts) {
      if (n >= min_games) accounts.insert(a);
    }
    auto champions = select_champions(games, role, min_accounts, &accounts);
    std::erase_if(champions, [&](const std::string& c) { return !sel.champions.contains(c); });
    if (accounts == sel.accounts && champions == sel.champions) break;
    sel.accounts = std::move(accounts);
    sel.champions = std::move(champions);
  }
  return sel;
}

/// Games with at least one focal row.
inline std::vector<GameRecord> games_with_focal(std::span<const GameRecord> games, const FocalSelection& sel) {
  std::vector<GameRecord> out;
  for (const auto& g : games) {
    if (std::any_of(g.players.begin(), g.players.end(), [&](const PlayerRow& p) { return sel.contains(p); })) {
      out.push_back(g);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standardization

struct Scale {
  double mean = 0.0;
  double sd = 1.0;

  double apply(double x) const { return (x - mean) / sd; }
  double invert(double z) const { return z * sd + mean; }

  friend bool operator==(const Scale&, const Scale&) = default;
};

struct Standardized {
  std::vector<double> values;
  Scale scale;
};

/// Centers and scales by the sample mean and (n - 1) standard deviation.
inline Standardized standardize(std::span<const double> values) {
  if (values.size() < 2) throw DegenerateError("standardize needs at least 2 values");
  const double m = stats::mean(values);
  const double s = stats::sd(values);
  if (!(s > 0.0) || !std::isfinite(s)) throw DegenerateError("standardize: values have zero variance");
  Standardized out{{}, {m, s}};
  out.values.reserve(values.size());
  for (double v : values) out.values.push_back((v - m) / s);
  return out;
}

// ---------------------------------------------------------------------------
// Observation tables

struct ObsRow {
  std::size_t account = 0;
  std::size_t champion = 0;
  double response = 0.0;
  double covariate = 0.0;  // meaningful only when the table has a covariate
  std::string game_id;
};

struct ObservationTable {
  CellKey key;
  bool has_covariate = false;
  std::vector<ObsRow> rows;
  Scale response_scale;
  Scale covariate_scale;
  std::vector<std::string> account_ids;
  std::vector<std::string> champion_ids;

  std::size_t n_accounts() const { return account_ids.size(); }
  std::size_t n_champions() const { return champion_ids.size(); }

  std::vector<double> responses() const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.response);
    return out;
  }

  std::optional<std::size_t> account_index(const std::string& id) const {
    auto it = std::lower_bound(account_ids.begin(), account_ids.end(), id);
    if (it == account_ids.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - account_ids.begin());
  }
  std::optional<std::size_t> champion_index(const std::string& id) const {
    auto it = std::lower_bound(champion_ids.begin(), champion_ids.end(), id);
    if (it == champion_ids.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - champion_ids.begin());
  }
};

/// A table row keyed by ids, before index assignment.
struct RawRow {
  std::string account_id;
  std::string champion_id;
  double response = 0.0;
  double covariate = 0.0;
  std::string game_id;
};

/// Builds a table from raw rows: assigns sorted dense indices and,
/// optionally, standardizes response and covariate.
inline ObservationTable table_from_raw(const CellKey& key, std::span<const RawRow> raw, bool has_covariate,
                                       bool standardize_columns) {
  if (raw.empty()) throw DegenerateError("observation table " + key.label() + " has no qualifying rows");
  ObservationTable t;
  t.key = key;
  t.has_covariate = has_covariate;
  std::set<std::string> accounts, champions;
  for (const auto& r : raw) {
    accounts.insert(r.account_id);
    champions.insert(r.champion_id);
  }
  t.account_ids.assign(accounts.begin(), accounts.end());
  t.champion_ids.assign(champions.begin(), champions.end());
  std::vector<double> y, x;
  for (const auto& r : raw) {
    y.push_back(r.response);
    x.push_back(r.covariate);
  }
  if (standardize_columns) {
    auto ys = standardize(y);
    y = std::move(ys.values);
    t.response_scale = ys.scale;
    if (has_covariate) {
      auto xs = standardize(x);
      x = std::move(xs.values);
      t.covariate_scale = xs.scale;
    }
  }
  t.rows.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    t.rows.push_back(ObsRow{*t.account_index(raw[i].account_id), *t.champion_index(raw[i].champion_id), y[i],
                            has_covariate ? x[i] : 0.0, raw[i].game_id});
  }
  return t;
}

/// One row per qualifying (account, game) in the cell. With `focal`, only
/// focal rows qualify; without it every participant in the role does (used
/// for the expanded models). Games must already be restricted to
/// `key.server` and filtered.
inline ObservationTable build_observation_table(std::span<const GameRecord> games, const CellKey& key,
                                                const FocalSelection* focal = nullptr) {
  const bool has_cov = key.stat == Stat::DMG;
  const Field field = response_field(key.stat);
  std::vector<RawRow> raw;
  for (const auto& g : games) {
    if (g.server != key.server) continue;
    for (const auto& p : g.players) {
      if (p.role != key.role) continue;
      if (focal && !focal->contains(p)) continue;
      auto y = phase_value(p, key.phase, field);
      if (!y) continue;
      double x = 0.0;
      if (has_cov) x = *phase_value(p, key.phase, Field::DMG_TAKEN);
      raw.push_back(RawRow{p.account_id, p.champion_id, *y, x, g.game_id});
    }
  }
  return table_from_raw(key, raw, has_cov, true);
}

/// Writes the table as `account_index,champion_index,response,covariate`;
/// the covariate column is empty when the table has none.
inline void write_table_csv(std::ostream& os, const ObservationTable& t) {
  os << "account_index,champion_index,response,covariate\n";
  for (const auto& r : t.rows) {
    os << r.account << ',' << r.champion << ',' << csv::format_double(r.response) << ','
       << (t.has_covariate ? csv::format_double(r.covariate) : std::string()) << '\n';
  }
}

/// Reads the CSV schema above. Ids are synthesized as a<index> / c<index>
/// (zero padded so that sorted order equals index order).
inline ObservationTable read_table_csv(std::istream& in, const CellKey& key) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty observation table file");
  const auto header = csv::split_line(line);
  if (header.size() != 4 || header[0] != "account_index" || header[1] != "champion_index" ||
      header[2] != "response" || header[3] != "covariate") {
    throw IoError("observation table header must be account_index,champion_index,response,covariate");
  }
  ObservationTable t;
  t.key = key;
  std::size_t line_no = 1, max_a = 0, max_c = 0;
  bool any_cov = false, any_missing_cov = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \r") == std::string::npos) continue;
    const auto f = csv::split_line(line);
    auto a = csv::parse_double(f.size() > 0 ? f[0] : "");
    auto c = csv::parse_double(f.size() > 1 ? f[1] : "");
    auto y = csv::parse_double(f.size() > 2 ? f[2] : "");
    if (f.size() != 4 || !a || !c || !y || *a < 0 || *c < 0) {
      throw IoError("malformed observation row at line " + std::to_string(line_no));
    }
    auto x = csv::parse_double(f[3]);
    (x ? any_cov : any_missing_cov) = true;
    ObsRow r{static_cast<std::size_t>(*a), static_cast<std::size_t>(*c), *y, x.value_or(0.0), ""};
    max_a = std::max(max_a, r.account);
    max_c = std::max(max_c, r.champion);
    t.rows.push_back(r);
  }
  if (t.rows.empty()) throw DegenerateError("observation table file has no rows");
  if (any_cov && any_missing_cov) throw IoError("covariate column is partially filled");
  t.has_covariate = any_cov;
  auto pad = [](char prefix, std::size_t i, std::size_t n) {
    std::string digits = std::to_string(i);
    const std::size_t width = std::to_string(n).size();
    return std::string(1, prefix) + std::string(width - digits.size(), '0') + digits;
  };
  for (std::size_t i = 0; i <= max_a; ++i) t.account_ids.push_back(pad('a', i, max_a));
  for (std::size_t j = 0; j <= max_c; ++j) t.champion_ids.push_back(pad('c', j, max_c));
  return t;
}

// ---------------------------------------------------------------------------
// Roster linking

struct RosterLabel {
  std::string account_id;
  std::string player_name;
  League league = League::NONE;
  bool is_pro = false;
};

struct RosterEntry {
  std::string player_name;
  League league = League::NONE;
};

/// Parses `account_id,player_name,league`. A repeated account with a
/// different league is a hard error.
inline std::map<std::string, RosterEntry> read_roster(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty roster file");
  const auto header = csv::split_line(line);
  if (header != std::vector<std::string>{"account_id", "player_name", "league"}) {
    throw IoError("roster header must be account_id,player_name,league");
  }
  std::map<std::string, RosterEntry> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \r") == std::string::npos) continue;
    const auto f = csv::split_line(line);
    if (f.size() != 3) throw ValidationError("ROSTER", "line " + std::to_string(line_no) + " needs 3 fields");
    auto league = parse_enum<League>(f[2]);
    if (!league) throw ValidationError("ROSTER", "unknown league '" + f[2] + "' at line " + std::to_string(line_no));
    auto [it, inserted] = out.emplace(f[0], RosterEntry{f[1], *league});
    if (!inserted && it->second.league != *league) {
      throw ValidationError("ROSTER_CONFLICT", "account " + f[0] + " listed under " +
                                                   std::string(to_string(it->second.league)) + " and " + f[2]);
    }
  }
  return out;
}

inline std::vector<RosterLabel> link_rosters(std::span<const std::string> accounts,
                                             const std::map<std::string, RosterEntry>& roster) {
  std::vector<RosterLabel> out;
  out.reserve(accounts.size());
  for (const auto& a : accounts) {
    auto it = roster.find(a);
    if (it == roster.end()) {
      out.push_back({a, "", League::NONE, false});
    } else {
      out.push_back({a, it->second.player_name, it->second.league, it->second.league != League::NONE});
    }
  }
  return out;
}

inline std::vector<RosterLabel> link_rosters(std::span<const std::string> accounts, std::istream& roster_csv) {
  return link_rosters(accounts, read_roster(roster_csv));
}

}  // namespace sido::data
