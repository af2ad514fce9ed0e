#pragma once

// End-to-end orchestration: ingest, filter, score every cell with the SIDO
// models and both baselines, compare pros with non-pros, grade the metrics,
// and emit the report directory.

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sido/analysis.hpp"
#include "sido/baselines.hpp"
#include "sido/config.hpp"
#include "sido/data.hpp"
#include "sido/fit_io.hpp"
#include "sido/metametrics.hpp"
#include "sido/models.hpp"
#include "sido/report.hpp"
#include "sido/scores.hpp"

namespace sido::pipeline {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Seed for one named consumer of the root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  return splitmix64(root ^ baselines::id_hash(label));
}

template <class E>
std::vector<E> parse_list(const config::KeyValues& kv, const std::string& key, std::vector<E> fallback) {
  if (!kv.contains(key)) return fallback;
  std::vector<E> out;
  const auto text = kv.get_string(key, "");
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    auto item = text.substr(start, end - start);
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (!item.empty()) {
      auto v = parse_enum<E>(item);
      if (!v) throw ValidationError("CONFIG", "unknown value '" + item + "' for " + key);
      out.push_back(*v);
    }
    start = end + 1;
  }
  return out;
}

template <class E>
std::string join(const std::vector<E>& values) {
  std::string out;
  for (const auto& v : values) out += (out.empty() ? "" : ",") + std::string(to_string(v));
  return out;
}

template <class E>
std::vector<E> values_vector() {
  const auto a = all_values<E>();
  return {a.begin(), a.end()};
}

struct PipelineConfig {
  std::string games_path;
  std::string followup_path;  // optional second period for stability
  std::string roster_path;    // optional
  std::vector<Server> servers;  // empty: every server present
  std::vector<Role> roles = values_vector<Role>();
  std::vector<Phase> phases = values_vector<Phase>();
  std::vector<Stat> stats = values_vector<Stat>();
  int min_games = 50;
  int min_accounts = 30;
  double disconnect_threshold = data::kDisconnectDamageTaken;
  infer::ModelConfig model;
  infer::ConvergenceGate gate;
  int ba_bootstrap = baselines::kBaBootstrap;
  int pm_bootstrap = baselines::kPmBootstrap;
  double pm_lambda_factor = 0.1;
  bool ally_enemy = true;
  bool fit_models = true;  // false: baselines only
  bool save_fits = false;
  std::uint64_t seed = 1;

  static PipelineConfig from(const config::KeyValues& kv) {
    PipelineConfig c;
    c.games_path = kv.get_string("games", "");
    c.followup_path = kv.get_string("followup_games", "");
    c.roster_path = kv.get_string("roster", "");
    c.servers = parse_list<Server>(kv, "servers", {});
    c.roles = parse_list<Role>(kv, "roles", c.roles);
    c.phases = parse_list<Phase>(kv, "phases", c.phases);
    c.stats = parse_list<Stat>(kv, "stats", c.stats);
    c.min_games = static_cast<int>(kv.get_int("min_games", c.min_games));
    c.min_accounts = static_cast<int>(kv.get_int("min_accounts", c.min_accounts));
    c.disconnect_threshold = kv.get_double("disconnect_threshold", c.disconnect_threshold);
    c.model.chains = static_cast<int>(kv.get_int("chains", c.model.chains));
    c.model.warmup = static_cast<int>(kv.get_int("warmup", c.model.warmup));
    c.model.draws = static_cast<int>(kv.get_int("draws", c.model.draws));
    c.model.effect_scale_prior = kv.get_double("effect_scale_prior", c.model.effect_scale_prior);
    c.model.noise_scale_prior = kv.get_double("noise_scale_prior", c.model.noise_scale_prior);
    c.model.effect_dof = kv.get_double("effect_dof", c.model.effect_dof);
    c.gate.max_rhat = kv.get_double("max_rhat", c.gate.max_rhat);
    c.gate.min_ess = kv.get_double("min_ess", c.gate.min_ess);
    c.ba_bootstrap = static_cast<int>(kv.get_int("ba_bootstrap", c.ba_bootstrap));
    c.pm_bootstrap = static_cast<int>(kv.get_int("pm_bootstrap", c.pm_bootstrap));
    c.pm_lambda_factor = kv.get_double("pm_lambda_factor", c.pm_lambda_factor);
    c.ally_enemy = kv.get_int("ally_enemy", 1) != 0;
    c.fit_models = kv.get_int("fit_models", 1) != 0;
    c.save_fits = kv.get_int("save_fits", 0) != 0;
    c.seed = kv.get_u64("seed", c.seed);
    c.model.validate();
    if (!(c.pm_lambda_factor > 0.0)) throw ValidationError("CONFIG", "pm_lambda_factor must be > 0");
    return c;
  }

  /// Effective settings, recorded in the manifest.
  std::map<std::string, std::string> describe() const {
    return {{"games", games_path},
            {"followup_games", followup_path},
            {"roster", roster_path},
            {"servers", join(servers)},
            {"roles", join(roles)},
            {"phases", join(phases)},
            {"stats", join(stats)},
            {"min_games", std::to_string(min_games)},
            {"min_accounts", std::to_string(min_accounts)},
            {"disconnect_threshold", csv::format_double(disconnect_threshold)},
            {"chains", std::to_string(model.chains)},
            {"warmup", std::to_string(model.warmup)},
            {"draws", std::to_string(model.draws)},
            {"effect_scale_prior", csv::format_double(model.effect_scale_prior)},
            {"noise_scale_prior", csv::format_double(model.noise_scale_prior)},
            {"effect_dof", csv::format_double(model.effect_dof)},
            {"max_rhat", csv::format_double(gate.max_rhat)},
            {"min_ess", csv::format_double(gate.min_ess)},
            {"ba_bootstrap", std::to_string(ba_bootstrap)},
            {"pm_bootstrap", std::to_string(pm_bootstrap)},
            {"pm_lambda_factor", csv::format_double(pm_lambda_factor)},
            {"ally_enemy", ally_enemy ? "1" : "0"},
            {"fit_models", fit_models ? "1" : "0"},
            {"save_fits", save_fits ? "1" : "0"},
            {"seed", std::to_string(seed)}};
  }
};

/// Runs f(0..n-1) on up to hardware_concurrency threads; the first
/// exception is rethrown after all jobs finish.
template <class F>
void parallel_for(std::size_t n, F&& f) {
  const unsigned hw = std::thread::hardware_concurrency();
  if (hw <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> workers;
    for (unsigned k = 0; k < std::min<std::size_t>(hw, n); ++k) {
      workers.emplace_back([&] {
        for (;;) {
          const std::size_t i = next++;
          if (i >= n) return;
          try {
            f(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Ingest

struct Ingested {
  std::vector<data::GameRecord> games;
  std::vector<data::LineIssue> issues;
  std::vector<report::Stage> stages;
  report::InputDigest digest;
};

/// Parses a game file, drops disconnect games, and keeps `servers` (all when
/// empty). Stage names get `prefix`.
inline Ingested ingest(const std::filesystem::path& path, const PipelineConfig& cfg, const std::string& prefix = "") {
  Ingested out;
  const auto bytes = report::read_file(path);
  out.digest = {path.filename().string(), report::sha256_hex(bytes), bytes.size()};
  std::istringstream in(bytes);
  auto parsed = data::parse_game_records(in);
  out.issues = parsed.issues;
  out.stages.push_back({prefix + "parse", parsed.lines_read, parsed.games.size(), parsed.issue_counts()});
  auto kept = data::filter_disconnects(parsed.games, cfg.disconnect_threshold);
  report::Stage dc{prefix + "disconnect_filter", parsed.games.size(), kept.size(), {}};
  if (kept.size() != parsed.games.size()) dc.exclusions["DISCONNECT"] = parsed.games.size() - kept.size();
  out.stages.push_back(dc);
  std::vector<data::GameRecord> games;
  for (auto& g : kept) {
    if (cfg.servers.empty() || std::find(cfg.servers.begin(), cfg.servers.end(), g.server) != cfg.servers.end()) {
      games.push_back(std::move(g));
    }
  }
  report::Stage sv{prefix + "server_filter", kept.size(), games.size(), {}};
  if (games.size() != kept.size()) sv.exclusions["OTHER_SERVER"] = kept.size() - games.size();
  out.stages.push_back(sv);
  out.games = std::move(games);
  return out;
}

// ---------------------------------------------------------------------------
// Scoring

struct ProficiencyRow {
  CellKey key;
  models::Proficiency value;
};

struct ScoreRun {
  std::vector<ScoreRecord> scores;
  std::vector<ProficiencyRow> proficiency;
  std::vector<infer::PosteriorFit> fits;
  std::vector<report::Stage> ledger;
  std::vector<std::string> warnings;
  std::size_t gate_failures = 0;
  std::map<std::pair<Server, Role>, data::FocalSelection> focal;
};

inline std::vector<Server> servers_present(std::span<const data::GameRecord> games) {
  std::set<Server> s;
  for (const auto& g : games) s.insert(g.server);
  return {s.begin(), s.end()};
}

namespace detail {

inline report::Stage row_ledger(const std::string& name, std::size_t input, std::size_t output,
                                std::map<std::string, std::size_t> exclusions) {
  report::Stage s{name, input, output, std::move(exclusions)};
  std::erase_if(s.exclusions, [](const auto& kv) { return kv.second == 0; });
  return s;
}

inline void fill_games(std::vector<ScoreRecord>& recs, std::size_t first, const std::map<std::string, std::size_t>& n) {
  for (std::size_t i = first; i < recs.size(); ++i) {
    auto it = n.find(recs[i].account_id);
    if (it != n.end()) recs[i].n_games = it->second;
  }
}

inline std::map<std::string, std::size_t> rows_per_account(const data::ObservationTable& t) {
  std::map<std::string, std::size_t> n;
  for (const auto& r : t.rows) ++n[t.account_ids[r.account]];
  return n;
}

/// All fits, scores and ledger entries for one (server, role).
inline ScoreRun score_role(std::span<const data::GameRecord> server_games, const data::FocalSelection& focal,
                           Server server, const PipelineConfig& cfg) {
  ScoreRun out;
  const auto fg = data::games_with_focal(server_games, focal);
  for (Stat stat : cfg.stats) {
    for (Phase phase : cfg.phases) {
      const CellKey key{focal.role, server, phase, stat, Scope::PLAYER};
      const auto label = key.label();
      std::size_t focal_rows = 0, missing = 0;
      for (const auto& g : fg) {
        for (const auto& p : g.players) {
          if (!focal.contains(p)) continue;
          ++focal_rows;
          if (!data::phase_value(p, phase, data::response_field(stat))) ++missing;
        }
      }
      out.ledger.push_back(row_ledger("rows:" + label, focal_rows, focal_rows - missing, {{"MISSING_SNAPSHOT", missing}}));
      if (focal_rows == missing) {
        out.warnings.push_back("cell " + label + " has no rows; skipped");
        continue;
      }
      data::ObservationTable table;
      try {
        table = data::build_observation_table(fg, key, &focal);
      } catch (const DegenerateError& e) {
        out.warnings.push_back("cell " + label + " skipped: " + e.what());
        continue;
      }
      const auto ba = baselines::ba_scores(table, derive_seed(cfg.seed, "ba:" + label), cfg.ba_bootstrap);
      const auto ba_records = baselines::ba_score_records(ba);
      out.scores.insert(out.scores.end(), ba_records.begin(), ba_records.end());
      if (!cfg.fit_models) continue;

      auto mc = cfg.model;
      mc.seed = derive_seed(cfg.seed, "fit:" + label);
      auto player = models::fit_player_model(table, mc, cfg.gate);
      const auto n_games = rows_per_account(table);

      for (const auto& p : models::champion_proficiency(player, table)) out.proficiency.push_back({key, p});

      if (cfg.ally_enemy) {
        auto emc = cfg.model;
        emc.seed = derive_seed(cfg.seed, "expanded:" + label);
        const auto expanded = models::fit_expanded_models(fg, key, emc, cfg.gate);
        std::vector<infer::PosteriorFit> side;
        std::map<Scope, std::map<std::string, std::size_t>> side_games;
        for (Scope scope : {Scope::ALLY, Scope::ENEMY}) {
          const auto rt = models::build_residual_table(fg, expanded, scope, focal, key);
          CellKey sk = key;
          sk.scope = scope;
          out.ledger.push_back(row_ledger("rows:" + sk.label(), rt.focal_rows, rt.rows.size(), rt.exclusions));
          auto smc = cfg.model;
          smc.seed = derive_seed(cfg.seed, "fit:" + sk.label());
          side.push_back(models::fit_residual_model(rt, scope, smc, cfg.gate));
          for (const auto& r : rt.rows) ++side_games[scope][r.account_id];
        }
        const auto table_scores = models::sido_score_table(&player, &side[0], &side[1]);
        for (auto s : table_scores.scores) {
          s.n_games = s.key.scope == Scope::PLAYER || s.key.scope == Scope::ALLY_PLUS_PLAYER
                          ? n_games.at(s.account_id)
                          : side_games[s.key.scope][s.account_id];
          out.scores.push_back(s);
        }
        for (const auto& [id, scope] : table_scores.missing) {
          out.warnings.push_back("account " + id + " lacks a " + std::string(to_string(scope)) + " score in " + label);
        }
        for (auto& f : side) out.fits.push_back(std::move(f));
        for (Role r : all_values<Role>()) {
          const auto& f = expanded.at(r).fit;
          if (!f.warnings.empty()) {
            ++out.gate_failures;
            out.warnings.push_back("expanded " + std::string(to_string(r)) + " model for " + label + ": " +
                                   f.warnings.front());
          }
        }
      } else {
        const std::size_t first = out.scores.size();
        const auto recs = models::scores_from_fit(player, Scope::PLAYER);
        out.scores.insert(out.scores.end(), recs.begin(), recs.end());
        fill_games(out.scores, first, n_games);
      }
      out.fits.push_back(std::move(player));
    }
  }
  for (const auto& f : out.fits) {
    if (!f.warnings.empty()) {
      ++out.gate_failures;
      out.warnings.push_back(f.identity.label() + ": " + f.warnings.front());
    }
  }
  return out;
}

/// PM_OFF / PM_DEF records for one (server, phase, stat), labeled per role
/// for that role's focal accounts.
inline ScoreRun score_plus_minus(std::span<const data::GameRecord> server_games, Server server, Phase phase, Stat stat,
                                 const std::map<Role, const data::FocalSelection*>& focal, const PipelineConfig& cfg) {
  ScoreRun out;
  const CellKey key{Role::TOP, server, phase, stat, Scope::PM_OFF};
  const auto label = std::string(to_string(server)) + "_" + std::string(to_string(phase)) + "_" +
                     std::string(to_string(stat));
  baselines::PmDesign design;
  try {
    design = baselines::pm_design(server_games, key);
  } catch (const DegenerateError& e) {
    out.warnings.push_back("plus-minus " + label + " skipped: " + e.what());
    return out;
  }
  const auto fit = baselines::fit_plus_minus(design, cfg.pm_lambda_factor * static_cast<double>(design.rows.size()));
  const auto unc = baselines::pm_bootstrap(design, fit, derive_seed(cfg.seed, "pm:" + label), cfg.pm_bootstrap);
  std::map<std::string, std::size_t> appearances;
  for (const auto& r : design.rows) {
    for (auto c : r.plus) ++appearances[design.player_ids[c]];
  }
  for (const auto& [role, sel] : focal) {
    const auto first = out.scores.size();
    auto recs = baselines::pm_score_records(fit, &unc, role, sel->accounts);
    out.scores.insert(out.scores.end(), recs.begin(), recs.end());
    fill_games(out.scores, first, appearances);
  }
  return out;
}

}  // namespace detail

/// Scores every configured cell of `games` (already ingested).
inline ScoreRun compute_scores(std::span<const data::GameRecord> games, const PipelineConfig& cfg) {
  ScoreRun out;
  const auto servers = cfg.servers.empty() ? servers_present(games) : cfg.servers;
  std::map<Server, std::vector<data::GameRecord>> by_server;
  for (Server s : servers) by_server[s] = data::filter_server(games, s);

  struct RoleJob {
    Server server;
    Role role;
  };
  std::vector<RoleJob> role_jobs;
  for (Server s : servers) {
    for (Role r : cfg.roles) {
      auto sel = data::select_focal(by_server[s], r, cfg.min_games, cfg.min_accounts);
      if (sel.accounts.empty() || sel.champions.empty()) {
        out.warnings.push_back("no focal accounts for " + std::string(to_string(r)) + " on " +
                               std::string(to_string(s)));
        continue;
      }
      out.focal.emplace(std::pair{s, r}, std::move(sel));
      role_jobs.push_back({s, r});
    }
  }
  struct PmJob {
    Server server;
    Phase phase;
    Stat stat;
  };
  std::vector<PmJob> pm_jobs;
  for (Server s : servers) {
    for (Stat st : cfg.stats) {
      for (Phase ph : cfg.phases) pm_jobs.push_back({s, ph, st});
    }
  }
  std::vector<ScoreRun> results(role_jobs.size() + pm_jobs.size());
  parallel_for(results.size(), [&](std::size_t i) {
    if (i < role_jobs.size()) {
      const auto& j = role_jobs[i];
      results[i] = detail::score_role(by_server[j.server], out.focal.at({j.server, j.role}), j.server, cfg);
    } else {
      const auto& j = pm_jobs[i - role_jobs.size()];
      std::map<Role, const data::FocalSelection*> focal;
      for (const auto& [k, sel] : out.focal) {
        if (k.first == j.server) focal[k.second] = &sel;
      }
      results[i] = detail::score_plus_minus(by_server[j.server], j.server, j.phase, j.stat, focal, cfg);
    }
  });
  for (auto& r : results) {
    out.scores.insert(out.scores.end(), r.scores.begin(), r.scores.end());
    out.proficiency.insert(out.proficiency.end(), r.proficiency.begin(), r.proficiency.end());
    for (auto& f : r.fits) out.fits.push_back(std::move(f));
    out.ledger.insert(out.ledger.end(), r.ledger.begin(), r.ledger.end());
    out.warnings.insert(out.warnings.end(), r.warnings.begin(), r.warnings.end());
    out.gate_failures += r.gate_failures;
  }
  std::stable_sort(out.scores.begin(), out.scores.end(), [](const ScoreRecord& a, const ScoreRecord& b) {
    if (a.key != b.key) return a.key < b.key;
    return a.account_id < b.account_id;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Meta-metrics

inline constexpr std::array<Scope, 7> kGradedScopes{Scope::PLAYER, Scope::ALLY,   Scope::ENEMY, Scope::ALLY_PLUS_PLAYER,
                                                    Scope::BA,     Scope::PM_OFF, Scope::PM_DEF};
inline constexpr std::array<Scope, 6> kIndependenceScopes{Scope::BA,    Scope::PLAYER, Scope::ALLY,
                                                          Scope::ENEMY, Scope::PM_OFF, Scope::PM_DEF};

using ColumnMap = std::map<CellKey, meta::MetricColumn>;

/// One metric column per cell key; sampling variance is sd^2 when every
/// account has an sd.
inline ColumnMap columns_by_cell(std::span<const ScoreRecord> scores) {
  ColumnMap out;
  std::map<CellKey, bool> all_sd;
  for (const auto& s : scores) {
    if (!s.has_score()) continue;
    auto& col = out[s.key];
    if (col.name.empty()) {
      col.name = s.key.label();
      col.sampling_variance.emplace();
      all_sd[s.key] = true;
    }
    col.account_ids.push_back(s.account_id);
    col.scores.push_back(s.score);
    if (std::isnan(s.sd)) all_sd[s.key] = false;
    col.sampling_variance->push_back(s.sd * s.sd);
  }
  for (auto& [k, col] : out) {
    if (!all_sd[k]) col.sampling_variance.reset();
  }
  return out;
}

inline report::MetaRow meta_row(const CellKey& k, double value) {
  return {k.role, k.server, k.phase, k.stat, std::string(analysis::method_of(k.scope)), k.scope, value};
}

/// Discrimination for every (role, server, phase, stat) and graded scope;
/// cells that are absent or degenerate carry NaN.
inline std::vector<report::MetaRow> discrimination_rows(std::span<const ScoreRecord> scores,
                                                        std::span<const CellKey> cells) {
  const auto cols = columns_by_cell(scores);
  std::vector<report::MetaRow> out;
  for (const auto& c : cells) {
    for (Scope scope : kGradedScopes) {
      CellKey k = c;
      k.scope = scope;
      double v = std::numeric_limits<double>::quiet_NaN();
      auto it = cols.find(k);
      if (it != cols.end() && it->second.sampling_variance && it->second.scores.size() >= 3) {
        const auto d = meta::discrimination(it->second);
        if (!d.degenerate) v = d.value;
      }
      out.push_back(meta_row(k, v));
    }
  }
  return out;
}

/// Independence within each (role, server, phase) over both stats.
inline std::vector<report::MetaRow> independence_rows(std::span<const ScoreRecord> scores,
                                                      std::span<const CellKey> cells, std::span<const Stat> stats) {
  const auto cols = columns_by_cell(scores);
  std::set<std::tuple<Role, Server, Phase>> groups;
  for (const auto& c : cells) groups.insert({c.role, c.server, c.phase});
  std::vector<report::MetaRow> out;
  for (const auto& [role, server, phase] : groups) {
    std::vector<CellKey> keys;
    std::vector<meta::MetricColumn> columns;
    std::vector<CellKey> wanted;
    for (Stat st : stats) {
      for (Scope scope : kIndependenceScopes) {
        CellKey k{role, server, phase, st, scope};
        wanted.push_back(k);
        auto it = cols.find(k);
        if (it != cols.end()) {
          keys.push_back(k);
          columns.push_back(it->second);
        }
      }
    }
    std::map<CellKey, double> value;
    try {
      if (columns.size() >= 2) {
        const auto v = meta::independence(columns);
        for (std::size_t i = 0; i < keys.size(); ++i) value[keys[i]] = v[i];
      }
    } catch (const DegenerateError&) {
    }
    for (const auto& k : wanted) {
      auto it = value.find(k);
      out.push_back(meta_row(k, it == value.end() ? std::numeric_limits<double>::quiet_NaN() : it->second));
    }
  }
  return out;
}

struct StabilityRows {
  std::vector<report::MetaRow> concordance;
  std::vector<report::MetaRow> categorized;
  std::vector<report::MetaRow> overlap;
};

/// Concordance between two periods on raw scores and on category ranks.
inline StabilityRows stability_rows(std::span<const ScoreRecord> first, std::span<const ScoreRecord> second,
                                    std::span<const CellKey> cells) {
  const auto a = columns_by_cell(first);
  const auto b = columns_by_cell(second);
  auto ranked = [](std::span<const ScoreRecord> scores) {
    std::map<CellKey, meta::MetricColumn> out;
    for (const auto& s : scores) {
      auto cat = s.category();
      if (!cat) continue;
      auto& col = out[s.key];
      col.account_ids.push_back(s.account_id);
      col.scores.push_back(meta::rank(*cat));
    }
    return out;
  };
  const auto ra = ranked(first);
  const auto rb = ranked(second);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto stab = [&](const ColumnMap& x, const ColumnMap& y, const CellKey& k, std::size_t* shared = nullptr) {
    auto ix = x.find(k);
    auto iy = y.find(k);
    if (ix == x.end() || iy == y.end()) return std::pair{nan, nan};
    try {
      const auto s = meta::concordance(ix->second, iy->second);
      if (shared) *shared = s.n_shared;
      return std::pair{s.value, s.overlap};
    } catch (const DegenerateError&) {
      return std::pair{nan, nan};
    }
  };
  StabilityRows out;
  for (const auto& c : cells) {
    for (Scope scope : kGradedScopes) {
      CellKey k = c;
      k.scope = scope;
      const auto [value, overlap] = stab(a, b, k);
      out.concordance.push_back(meta_row(k, value));
      out.overlap.push_back(meta_row(k, overlap));
      out.categorized.push_back(meta_row(k, stab(ra, rb, k).first));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full run

struct RunState {
  PipelineConfig config;
  report::RunManifest manifest;
  ScoreRun run;
  std::vector<CellKey> cells;  // (role, server, phase, stat) graded, scope PLAYER
  std::set<std::string> pros;
  bool has_roster = false;
  std::vector<analysis::GroupComparison> comparisons;
  std::vector<report::MetaRow> discrimination;
  std::vector<report::MetaRow> independence;
  std::optional<StabilityRows> stability;
  std::vector<analysis::Differential> differentials;
  std::vector<std::pair<std::pair<Role, Server>, std::vector<models::ProfileRow>>> profiles;
  std::vector<data::LineIssue> issues;
};

inline RunState run_pipeline(const PipelineConfig& cfg) {
  if (cfg.games_path.empty()) throw ValidationError("CONFIG", "no games file configured");
  RunState st;
  st.config = cfg;
  st.manifest.seed = cfg.seed;
  st.manifest.config = cfg.describe();
  auto in = ingest(cfg.games_path, cfg);
  st.manifest.inputs.push_back(in.digest);
  st.manifest.stages = in.stages;
  st.issues = in.issues;

  if (!cfg.roster_path.empty()) {
    st.manifest.inputs.push_back(report::digest_file(cfg.roster_path));
    std::istringstream roster(report::read_file(cfg.roster_path));
    for (const auto& [id, entry] : data::read_roster(roster)) {
      if (entry.league != League::NONE) st.pros.insert(id);
    }
    st.has_roster = true;
  }

  st.run = compute_scores(in.games, cfg);
  st.manifest.cell_ledger = st.run.ledger;
  st.manifest.warnings = st.run.warnings;

  for (const auto& [k, sel] : st.run.focal) {
    for (Stat stat : cfg.stats) {
      for (Phase phase : cfg.phases) st.cells.push_back({k.second, k.first, phase, stat, Scope::PLAYER});
    }
  }
  std::sort(st.cells.begin(), st.cells.end());

  if (st.has_roster) {
    st.comparisons = analysis::compare_groups(st.run.scores, st.pros);
  } else {
    st.manifest.warnings.push_back("no roster configured; pro comparisons skipped");
  }
  st.discrimination = discrimination_rows(st.run.scores, st.cells);
  st.independence = independence_rows(st.run.scores, st.cells, cfg.stats);

  if (!cfg.followup_path.empty()) {
    auto later = ingest(cfg.followup_path, cfg, "followup:");
    st.manifest.inputs.push_back(later.digest);
    for (const auto& s : later.stages) st.manifest.cell_ledger.push_back(s);
    const auto second = compute_scores(later.games, cfg);
    for (const auto& w : second.warnings) st.manifest.warnings.push_back("followup: " + w);
    st.stability = stability_rows(st.run.scores, second.scores, st.cells);
  }

  st.differentials = analysis::differential_summary(in.games);

  for (const auto& [k, sel] : st.run.focal) {
    std::set<std::string> focal_pros;
    for (const auto& a : sel.accounts) {
      if (st.pros.contains(a)) focal_pros.insert(a);
    }
    if (!focal_pros.empty()) {
      st.profiles.push_back({{k.second, k.first}, models::metric_profile(st.run.scores, focal_pros, k.second, k.first)});
    }
  }
  return st;
}

/// Writes every report file into `out_dir`.
inline void emit_reports(const RunState& st, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  auto write = [&](const std::string& name, const std::string& content) { report::write_file(out_dir / name, content); };
  {
    std::ostringstream os;
    write_scores_csv(os, st.run.scores);
    write("scores.csv", os.str());
  }
  {
    std::ostringstream os;
    os << "role,server,phase,stat,account_id,champion_id,n_games,delta,standardized\n";
    for (const auto& p : st.run.proficiency) {
      csv::write_row(os, {std::string(to_string(p.key.role)), std::string(to_string(p.key.server)),
                          std::string(to_string(p.key.phase)), std::string(to_string(p.key.stat)),
                          p.value.account_id, p.value.champion_id, std::to_string(p.value.n_games),
                          csv::format_double(p.value.delta), csv::format_double(p.value.standardized)});
    }
    write("proficiency.csv", os.str());
  }
  {
    std::ostringstream os;
    report::write_comparisons_csv(os, st.comparisons);
    write("comparisons.csv", os.str());
  }
  auto split_by_stat = [&](const std::string& stem, const std::vector<report::MetaRow>& rows) {
    for (Stat stat : st.config.stats) {
      std::vector<report::MetaRow> part;
      for (const auto& r : rows) {
        if (r.stat == stat) part.push_back(r);
      }
      std::ostringstream os;
      report::write_meta_csv(os, part);
      auto name = std::string(to_string(stat));
      std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
      write(stem + "_" + name + ".csv", os.str());
    }
  };
  split_by_stat("discrimination", st.discrimination);
  split_by_stat("independence", st.independence);
  if (st.stability) {
    split_by_stat("stability", st.stability->concordance);
    split_by_stat("stability_categorized", st.stability->categorized);
    split_by_stat("stability_overlap", st.stability->overlap);
  } else {
    std::vector<report::MetaRow> empty;
    for (const auto& c : st.cells) {
      for (Scope scope : kGradedScopes) {
        CellKey k = c;
        k.scope = scope;
        empty.push_back(meta_row(k, std::numeric_limits<double>::quiet_NaN()));
      }
    }
    split_by_stat("stability", empty);
  }
  {
    std::ostringstream os;
    report::write_differentials_csv(os, st.differentials);
    write("differentials.csv", os.str());
  }
  for (Stat stat : all_values<Stat>()) {
    std::vector<report::Series> series;
    for (const auto& d : st.differentials) {
      if (d.stat == stat) {
        series.push_back({std::string(time_label(d.phase)) + " (" + csv::format_fixed(100.0 * d.fraction, 0) + "%)",
                          d.differentials});
      }
    }
    const std::string s(to_string(stat));
    write("plots/differential_" + s + ".svg",
          report::svg_density("Winner minus loser team " + s + " by phase", series, s + " differential"));
  }
  for (Stat stat : st.config.stats) {
    std::vector<report::Bar> bars;
    for (const auto& c : st.comparisons) {
      if (c.key.stat != stat) continue;
      bars.push_back({std::string(to_string(c.key.role)) + " " + std::string(to_string(c.key.server)) + " " +
                          std::string(time_label(c.key.phase)) + " " + std::string(to_string(c.key.scope)),
                      c.normalized_difference, !c.skipped && c.p_adjusted < 0.05});
    }
    const std::string s(to_string(stat));
    write("plots/comparison_" + s + ".svg",
          report::svg_bars("Pro minus non-pro, in non-pro sd (" + s + ")", bars, "normalized difference"));
  }
  for (const auto& [k, rows] : st.profiles) {
    std::ostringstream os;
    report::write_profile_csv(os, rows);
    write("profile_" + std::string(to_string(k.first)) + "_" + std::string(to_string(k.second)) + ".csv", os.str());
  }
  {
    std::ostringstream os;
    os << "line,code,message\n";
    for (const auto& i : st.issues) csv::write_row(os, {std::to_string(i.line), i.code, i.message});
    write("ingest_issues.csv", os.str());
  }
  if (st.config.save_fits) {
    for (const auto& f : st.run.fits) infer::save_fit_to_dir(f, out_dir / "fits");
  }
  write("manifest.json", st.manifest.to_json().dump(2) + "\n");
}

}  // namespace sido::pipeline
