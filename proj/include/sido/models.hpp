#pragma once

// Player, ally and enemy models, and the champion proficiency heuristic.
//
// Ally and enemy responses are built in two steps. An expanded player model
// is fitted per role over every participant of the focal games; each
// participant's residual is their observed standardized statistic minus the
// expanded model's posterior-mean expectation. For a focal player the ally
// response sums the four teammates' residuals and the enemy response sums
// the five opponents'. Both are then fitted with the player-model priors and
// no covariate. Enemy scores report -b_p.

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sido/data.hpp"
#include "sido/error.hpp"
#include "sido/inference.hpp"
#include "sido/scores.hpp"
#include "sido/stats.hpp"

namespace sido::models {

/// Fits the gold (no covariate) or damage (damage-taken covariate) model.
inline infer::PosteriorFit fit_player_model(const data::ObservationTable& table, infer::ModelConfig config,
                                            const infer::ConvergenceGate& gate = {}) {
  config.has_covariate = table.key.stat == Stat::DMG;
  return infer::fit_hierarchical(table, config, gate);
}

/// Posterior-mean expectation of one row under a fit:
/// E[beta0] + E[b_c] + E[b_a] (+ E[beta_dmgt] x).
inline double expected_own(const infer::PosteriorFit& fit, const std::vector<double>& means, std::size_t account,
                           std::size_t champion, double covariate = 0.0) {
  const infer::PredictRow row{account, champion, covariate};
  return infer::predict(fit, std::span<const infer::PredictRow>(&row, 1), &means)[0];
}

/// An expanded model for one role: its table, fit, and per-row residuals.
struct ExpandedModel {
  data::ObservationTable table;
  infer::PosteriorFit fit;
  std::vector<double> means;
  std::vector<double> residuals;                                      // per table row
  std::map<std::pair<std::string, std::string>, std::size_t> row_of;  // (game_id, account_id) -> row

  static ExpandedModel build(data::ObservationTable table, infer::PosteriorFit fit) {
    ExpandedModel m{std::move(table), std::move(fit), {}, {}, {}};
    m.means = infer::posterior_means(m.fit);
    m.residuals.reserve(m.table.rows.size());
    for (std::size_t i = 0; i < m.table.rows.size(); ++i) {
      const auto& r = m.table.rows[i];
      m.residuals.push_back(r.response - expected_own(m.fit, m.means, r.account, r.champion, r.covariate));
      m.row_of[{r.game_id, m.table.account_ids[r.account]}] = i;
    }
    return m;
  }

  /// Expectation for a participant identified by ids.
  double expected(const std::string& account_id, const std::string& champion_id, double covariate = 0.0) const {
    auto a = table.account_index(account_id);
    if (!a) throw ValidationError("EXPANDED", "participant " + account_id + " absent from expanded fit");
    auto c = table.champion_index(champion_id);
    if (!c) throw ValidationError("EXPANDED", "champion " + champion_id + " absent from expanded fit");
    return expected_own(fit, means, *a, *c, covariate);
  }

  std::optional<double> residual(const std::string& game_id, const std::string& account_id) const {
    auto it = row_of.find({game_id, account_id});
    if (it == row_of.end()) return std::nullopt;
    return residuals[it->second];
  }
};

using ExpandedModels = std::map<Role, ExpandedModel>;

/// Fits one expanded model per role over every participant of `focal_games`
/// (no game-count floor). `key.role` is ignored; each role's chains get a
/// seed offset from `config.seed`.
inline ExpandedModels fit_expanded_models(std::span<const data::GameRecord> focal_games, CellKey key,
                                          const infer::ModelConfig& config, const infer::ConvergenceGate& gate = {}) {
  ExpandedModels out;
  for (Role role : all_values<Role>()) {
    key.role = role;
    key.scope = Scope::PLAYER;
    auto table = data::build_observation_table(focal_games, key, nullptr);
    auto role_config = config;
    role_config.seed = config.seed + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(role) + 1);
    auto fit = fit_player_model(table, role_config, gate);
    out.emplace(role, ExpandedModel::build(std::move(table), std::move(fit)));
  }
  return out;
}

struct ResidualRow {
  std::string account_id;
  std::string champion_id;
  std::string game_id;
  double delta = 0.0;
  int n_terms = 0;
};

struct ResidualTable {
  CellKey key;
  std::vector<ResidualRow> rows;
  std::map<std::string, std::size_t> exclusions;  // reason -> focal rows dropped
  std::size_t focal_rows = 0;                     // focal rows considered
};

/// Sum of the four allies' (ALLY) or five enemies' (ENEMY) residuals for
/// every focal row of `key` (role, server, phase).
inline ResidualTable build_residual_table(std::span<const data::GameRecord> games, const ExpandedModels& expanded,
                                          Scope scope, const data::FocalSelection& focal, CellKey key) {
  if (scope != Scope::ALLY && scope != Scope::ENEMY) {
    throw ValidationError("SCOPE", "residual tables exist for ALLY and ENEMY only");
  }
  key.scope = scope;
  key.role = focal.role;
  ResidualTable out;
  out.key = key;
  const auto field = data::response_field(key.stat);
  for (const auto& g : games) {
    if (g.server != key.server) continue;
    for (const auto& p : g.players) {
      if (!focal.contains(p)) continue;
      ++out.focal_rows;
      if (!data::phase_value(p, key.phase, field)) {
        ++out.exclusions["MISSING_SNAPSHOT"];
        continue;
      }
      double delta = 0.0;
      int terms = 0;
      bool complete = true;
      for (const auto& q : g.players) {
        if (&q == &p) continue;
        const bool ally = q.team == p.team;
        if ((scope == Scope::ALLY) != ally) continue;
        auto model = expanded.find(q.role);
        std::optional<double> r;
        if (model != expanded.end()) r = model->second.residual(g.game_id, q.account_id);
        if (!r) {
          complete = false;
          break;
        }
        delta += *r;
        ++terms;
      }
      if (!complete) {
        ++out.exclusions["NOT_IN_EXPANDED"];
        continue;
      }
      out.rows.push_back({p.account_id, p.champion_id, g.game_id, delta, terms});
    }
  }
  return out;
}

/// Residual table as an observation table (responses left unscaled).
inline data::ObservationTable to_observation_table(const ResidualTable& rt) {
  std::vector<data::RawRow> raw;
  raw.reserve(rt.rows.size());
  for (const auto& r : rt.rows) raw.push_back({r.account_id, r.champion_id, r.delta, 0.0, r.game_id});
  return data::table_from_raw(rt.key, raw, false, false);
}

inline infer::PosteriorFit fit_residual_model(const ResidualTable& rt, Scope scope, infer::ModelConfig config,
                                              const infer::ConvergenceGate& gate) {
  if (rt.rows.empty()) throw DegenerateError("residual table " + rt.key.label() + " is empty");
  auto table = to_observation_table(rt);
  table.key.scope = scope;
  config.has_covariate = false;
  return infer::fit_hierarchical(table, config, gate);
}

inline infer::PosteriorFit fit_ally_model(const ResidualTable& rt, const infer::ModelConfig& config,
                                          const infer::ConvergenceGate& gate = {}) {
  return fit_residual_model(rt, Scope::ALLY, config, gate);
}

/// The fit is stored sign-unmodified; negation happens when scores are read.
inline infer::PosteriorFit fit_enemy_model(const ResidualTable& rt, const infer::ModelConfig& config,
                                           const infer::ConvergenceGate& gate = {}) {
  return fit_residual_model(rt, Scope::ENEMY, config, gate);
}

// ---------------------------------------------------------------------------
// Champion proficiency

/// Mean of y - (E[beta0] + E[b_c]) over a player's games on one champion.
inline double proficiency_delta(std::span<const double> responses, double intercept_mean, double champion_mean) {
  if (responses.empty()) throw DegenerateError("proficiency needs at least one game");
  double s = 0.0;
  for (double y : responses) s += y - (intercept_mean + champion_mean);
  return s / static_cast<double>(responses.size());
}

struct Proficiency {
  std::string account_id;
  std::string champion_id;
  std::size_t n_games = 0;
  double delta = 0.0;
  double standardized = std::numeric_limits<double>::quiet_NaN();  // NaN when the champion's set is degenerate
};

/// delta_pc for every (player, champion) pair in `table`, then centered and
/// scaled per champion across players.
inline std::vector<Proficiency> champion_proficiency(const infer::PosteriorFit& fit,
                                                     const data::ObservationTable& table) {
  const auto means = infer::posterior_means(fit);
  const double b0 = means[fit.intercept_param()];
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> groups;
  for (const auto& r : table.rows) groups[{r.champion, r.account}].push_back(r.response);
  std::vector<Proficiency> out;
  std::map<std::size_t, std::vector<std::size_t>> by_champion;
  for (const auto& [key, ys] : groups) {
    const auto& champion_id = table.champion_ids[key.first];
    auto it = std::lower_bound(fit.champion_ids.begin(), fit.champion_ids.end(), champion_id);
    if (it == fit.champion_ids.end() || *it != champion_id) {
      throw ValidationError("CHAMPION", "champion " + champion_id + " absent from fit");
    }
    const double bc = means[fit.champion_param(static_cast<std::size_t>(it - fit.champion_ids.begin()))];
    by_champion[key.first].push_back(out.size());
    out.push_back({table.account_ids[key.second], champion_id, ys.size(), proficiency_delta(ys, b0, bc)});
  }
  for (const auto& [champ, idx] : by_champion) {
    std::vector<double> d;
    for (auto i : idx) d.push_back(out[i].delta);
    if (d.size() < 2) continue;
    const double sd = stats::sd(d);
    if (!(sd > 0.0)) continue;
    const double m = stats::mean(d);
    for (auto i : idx) out[i].standardized = (out[i].delta - m) / sd;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Score tables

/// One record per account of `fit`. For ENEMY the score is -E[b_p] and the
/// sign probability is P(b_p < 0); otherwise E[b_p] and P(b_p > 0).
inline std::vector<ScoreRecord> scores_from_fit(const infer::PosteriorFit& fit, Scope scope) {
  std::vector<ScoreRecord> out;
  const bool negate = scope == Scope::ENEMY;
  CellKey key = fit.identity;
  key.scope = scope;
  for (std::size_t a = 0; a < fit.n_accounts(); ++a) {
    const auto s = infer::summarize_draws(fit.pooled(fit.account_param(a)));
    const double q = infer::sign_probability(fit, fit.account_param(a));
    const auto draws = fit.pooled(fit.account_param(a));
    const double neg = static_cast<double>(std::count_if(draws.begin(), draws.end(), [](double v) { return v < 0.0; })) /
                       static_cast<double>(draws.size());
    out.push_back({fit.account_ids[a], key, negate ? -s.mean : s.mean, s.sd, negate ? neg : q, 0});
  }
  return out;
}

struct SidoScoreTable {
  std::vector<ScoreRecord> scores;
  std::vector<std::pair<std::string, Scope>> missing;  // accounts scored by the player model only
};

/// Player, ally, enemy and ally+player scores for one (role, server, phase,
/// stat) cell. Ally+player sums the two means; its sd and sign probability
/// come from index-paired draws of the two independent fits.
inline SidoScoreTable sido_score_table(const infer::PosteriorFit* player, const infer::PosteriorFit* ally,
                                       const infer::PosteriorFit* enemy) {
  auto name = [](const infer::PosteriorFit* f, std::string_view which) {
    return f ? f->identity.label() : std::string(which);
  };
  if (!player || !ally || !enemy) {
    const auto* any = player ? player : ally ? ally : enemy;
    throw ValidationError("MISSING_FIT", "cell " + (any ? name(any, "") : std::string("<unknown>")) + " lacks its " +
                                             (!player ? "player" : !ally ? "ally" : "enemy") + " fit");
  }
  SidoScoreTable out;
  auto player_scores = scores_from_fit(*player, Scope::PLAYER);
  auto ally_scores = scores_from_fit(*ally, Scope::ALLY);
  auto enemy_scores = scores_from_fit(*enemy, Scope::ENEMY);
  auto index = [](const infer::PosteriorFit& f, const std::string& id) -> std::optional<std::size_t> {
    auto it = std::lower_bound(f.account_ids.begin(), f.account_ids.end(), id);
    if (it == f.account_ids.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - f.account_ids.begin());
  };
  for (std::size_t a = 0; a < player->n_accounts(); ++a) {
    const auto& id = player->account_ids[a];
    out.scores.push_back(player_scores[a]);
    auto ai = index(*ally, id);
    auto ei = index(*enemy, id);
    if (ai) {
      out.scores.push_back(ally_scores[*ai]);
      const auto pd = player->pooled(player->account_param(a));
      const auto ad = ally->pooled(ally->account_param(*ai));
      const std::size_t n = std::min(pd.size(), ad.size());
      std::vector<double> sum(n);
      for (std::size_t i = 0; i < n; ++i) sum[i] = pd[i] + ad[i];
      CellKey key = player->identity;
      key.scope = Scope::ALLY_PLUS_PLAYER;
      out.scores.push_back({id, key, player_scores[a].score + ally_scores[*ai].score,
                            stats::sd(sum), infer::sign_probability(sum), 0});
    } else {
      out.missing.push_back({id, Scope::ALLY});
    }
    if (ei) {
      out.scores.push_back(enemy_scores[*ei]);
    } else {
      out.missing.push_back({id, Scope::ENEMY});
    }
  }
  return out;
}

/// Average scores of `accounts` per metric row and phase, in the layout
/// Gold / Damage / Gold enabled (allies) / Damage enabled (allies) /
/// Gold prevented (enemies) / Damage prevented (enemies).
struct ProfileRow {
  std::string metric;
  std::array<double, 3> by_phase{};
};

inline std::vector<ProfileRow> metric_profile(std::span<const ScoreRecord> scores,
                                              const std::set<std::string>& accounts, Role role, Server server) {
  struct Spec {
    const char* name;
    Stat stat;
    Scope scope;
  };
  static constexpr std::array<Spec, 6> specs{{{"Gold", Stat::GOLD, Scope::PLAYER},
                                              {"Damage", Stat::DMG, Scope::PLAYER},
                                              {"Gold enabled (allies)", Stat::GOLD, Scope::ALLY},
                                              {"Damage enabled (allies)", Stat::DMG, Scope::ALLY},
                                              {"Gold prevented (enemies)", Stat::GOLD, Scope::ENEMY},
                                              {"Damage prevented (enemies)", Stat::DMG, Scope::ENEMY}}};
  std::vector<ProfileRow> out;
  for (const auto& spec : specs) {
    ProfileRow row{spec.name, {}};
    for (Phase phase : all_values<Phase>()) {
      std::vector<double> v;
      for (const auto& s : scores) {
        if (s.key.role == role && s.key.server == server && s.key.phase == phase && s.key.stat == spec.stat &&
            s.key.scope == spec.scope && s.has_score() && accounts.contains(s.account_id)) {
          v.push_back(s.score);
        }
      }
      row.by_phase[static_cast<std::size_t>(phase)] = stats::mean(v);
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace sido::models
