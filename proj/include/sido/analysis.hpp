#pragma once

// Pro versus non-pro comparisons, hypothesis testing, holdout prediction
// error and winner/loser differential summaries.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sido/baselines.hpp"
#include "sido/data.hpp"
#include "sido/error.hpp"
#include "sido/inference.hpp"
#include "sido/scores.hpp"
#include "sido/stats.hpp"

namespace sido::analysis {

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 0.5;  // P(T > t) for H1: mean(a) > mean(b)
};

inline WelchResult welch_one_sided(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw DegenerateError("Welch test needs >= 2 values per group");
  const double va = stats::variance(a) / static_cast<double>(a.size());
  const double vb = stats::variance(b) / static_cast<double>(b.size());
  if (!(va > 0.0) || !(vb > 0.0)) throw DegenerateError("Welch test needs positive variance in both groups");
  const double se2 = va + vb;
  WelchResult r;
  r.t = (stats::mean(a) - stats::mean(b)) / std::sqrt(se2);
  r.df = se2 * se2 /
         (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  r.p = stats::student_t_upper(r.t, r.df);
  return r;
}

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
inline std::vector<double> fdr_adjust(std::span<const double> p) {
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("PROBABILITY", "p-values must lie in [0, 1]");
  }
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return p[i] < p[j]; });
  std::vector<double> out(m);
  double running = 1.0;
  for (std::size_t k = m; k-- > 0;) {
    // p * m / (k+1) >= p exactly; the max guards the last-place rounding.
    const double v = std::max(p[order[k]], p[order[k]] * static_cast<double>(m) / static_cast<double>(k + 1));
    running = std::min(running, v);
    out[order[k]] = std::min(running, 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Group comparisons

inline std::string_view method_of(Scope scope) {
  switch (scope) {
    case Scope::BA:
      return "BA";
    case Scope::PM_OFF:
    case Scope::PM_DEF:
      return "PM";
    default:
      return "SIDO";
  }
}

struct GroupComparison {
  CellKey key;
  std::string method;
  std::size_t n_pro = 0;
  std::size_t n_nonpro = 0;
  double mean_pro = std::numeric_limits<double>::quiet_NaN();
  double mean_nonpro = std::numeric_limits<double>::quiet_NaN();
  double normalized_difference = std::numeric_limits<double>::quiet_NaN();
  double t = std::numeric_limits<double>::quiet_NaN();
  double df = std::numeric_limits<double>::quiet_NaN();
  double p_raw = std::numeric_limits<double>::quiet_NaN();
  double p_adjusted = std::numeric_limits<double>::quiet_NaN();
  bool skipped = false;
  std::string skip_reason;
};

/// Scopes compared by default: the ally + player composite, enemy, BA, and
/// the two Plus-Minus coefficients.
inline std::set<Scope> default_comparison_scopes() {
  return {Scope::ALLY_PLUS_PLAYER, Scope::ENEMY, Scope::BA, Scope::PM_OFF, Scope::PM_DEF};
}

/// One comparison per cell in `scopes`. Normalized difference divides by the
/// cell's non-pro sd. Adjustment is Benjamini-Hochberg within each method.
inline std::vector<GroupComparison> compare_groups(std::span<const ScoreRecord> scores,
                                                   const std::set<std::string>& pros,
                                                   const std::set<Scope>& scopes = default_comparison_scopes()) {
  std::map<CellKey, std::pair<std::vector<double>, std::vector<double>>> cells;
  for (const auto& s : scores) {
    if (!scopes.contains(s.key.scope) || !s.has_score()) continue;
    auto& cell = cells[s.key];
    (pros.contains(s.account_id) ? cell.first : cell.second).push_back(s.score);
  }
  std::vector<GroupComparison> out;
  for (const auto& [key, groups] : cells) {
    const auto& [pro, non] = groups;
    GroupComparison c;
    c.key = key;
    c.method = std::string(method_of(key.scope));
    c.n_pro = pro.size();
    c.n_nonpro = non.size();
    c.mean_pro = stats::mean(pro);
    c.mean_nonpro = stats::mean(non);
    if (pro.size() < 2) {
      c.skipped = true;
      c.skip_reason = "FEW_PROS";
    } else if (non.size() < 2) {
      c.skipped = true;
      c.skip_reason = "FEW_NONPROS";
    } else {
      const double sd = stats::sd(non);
      try {
        const auto w = welch_one_sided(pro, non);
        c.t = w.t;
        c.df = w.df;
        c.p_raw = w.p;
        c.normalized_difference = (c.mean_pro - c.mean_nonpro) / sd;
      } catch (const DegenerateError&) {
        c.skipped = true;
        c.skip_reason = "ZERO_VARIANCE";
      }
    }
    out.push_back(std::move(c));
  }
  std::map<std::string, std::vector<std::size_t>> families;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i].skipped) families[out[i].method].push_back(i);
  }
  for (const auto& [method, idx] : families) {
    std::vector<double> p;
    for (auto i : idx) p.push_back(out[i].p_raw);
    const auto adj = fdr_adjust(p);
    for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]].p_adjusted = adj[k];
  }
  return out;
}

/// Player-level scores: accounts sharing a roster player name are averaged
/// into one record whose id is the player name.
inline std::vector<ScoreRecord> aggregate_by_player(std::span<const ScoreRecord> scores,
                                                    const std::map<std::string, data::RosterEntry>& roster) {
  std::map<std::pair<CellKey, std::string>, std::vector<double>> groups;
  for (const auto& s : scores) {
    auto it = roster.find(s.account_id);
    if (it == roster.end() || !s.has_score()) continue;
    groups[{s.key, it->second.player_name}].push_back(s.score);
  }
  std::vector<ScoreRecord> out;
  for (const auto& [k, v] : groups) {
    ScoreRecord r;
    r.account_id = k.second;
    r.key = k.first;
    r.score = stats::mean(v);
    r.n_games = v.size();
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Holdout prediction error

struct RmseReport {
  std::vector<std::pair<std::string, double>> per_account;  // sorted by id
  std::size_t rows_used = 0;
  std::size_t excluded_unseen_account = 0;
  std::size_t excluded_unseen_champion = 0;

  double mean_rmse() const {
    std::vector<double> v;
    for (const auto& [id, r] : per_account) v.push_back(r);
    return stats::mean(v);
  }
};

/// A predictor returns nullopt for an unseen account (first) or champion.
using Predictor = std::function<std::optional<double>(const std::string& account, const std::string& champion,
                                                      double covariate, bool& unseen_account)>;

inline RmseReport rmse_with(const data::ObservationTable& holdout, const Predictor& predict) {
  if (holdout.rows.empty()) throw DegenerateError("holdout table is empty");
  std::map<std::string, std::pair<double, std::size_t>> acc;
  RmseReport rep;
  for (const auto& r : holdout.rows) {
    const auto& a = holdout.account_ids[r.account];
    bool unseen_account = false;
    auto yhat = predict(a, holdout.champion_ids[r.champion], r.covariate, unseen_account);
    if (!yhat) {
      ++(unseen_account ? rep.excluded_unseen_account : rep.excluded_unseen_champion);
      continue;
    }
    const double e = r.response - *yhat;
    auto& [ss, n] = acc[a];
    ss += e * e;
    ++n;
    ++rep.rows_used;
  }
  for (const auto& [a, v] : acc) rep.per_account.push_back({a, std::sqrt(v.first / static_cast<double>(v.second))});
  return rep;
}

/// Per-account RMSE of the hierarchical fit's posterior-mean predictions.
inline RmseReport rmse_by_account(const infer::PosteriorFit& fit, const data::ObservationTable& holdout) {
  const auto means = infer::posterior_means(fit);
  auto index = [](const std::vector<std::string>& ids, const std::string& id) -> std::optional<std::size_t> {
    auto it = std::lower_bound(ids.begin(), ids.end(), id);
    if (it == ids.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - ids.begin());
  };
  return rmse_with(holdout, [&](const std::string& a, const std::string& c, double x, bool& unseen_account)
                                -> std::optional<double> {
    auto ai = index(fit.account_ids, a);
    if (!ai) {
      unseen_account = true;
      return std::nullopt;
    }
    auto ci = index(fit.champion_ids, c);
    if (!ci) return std::nullopt;
    const infer::PredictRow row{*ai, *ci, x};
    return infer::predict(fit, std::span<const infer::PredictRow>(&row, 1), &means)[0];
  });
}

/// Per-account RMSE of BA means used as predictions.
inline RmseReport rmse_by_account(std::span<const baselines::BaScore> ba, const data::ObservationTable& holdout) {
  std::map<std::string, double> means;
  for (const auto& s : ba) means[s.account_id] = s.mean;
  return rmse_with(holdout, [&](const std::string& a, const std::string&, double, bool& unseen_account)
                                -> std::optional<double> {
    auto it = means.find(a);
    if (it == means.end()) {
      unseen_account = true;
      return std::nullopt;
    }
    return it->second;
  });
}

// ---------------------------------------------------------------------------
// Winner minus loser differentials

inline double fraction_positive(std::span<const double> differentials) {
  if (differentials.empty()) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(std::count_if(differentials.begin(), differentials.end(),
                                           [](double d) { return d > 0.0; })) /
         static_cast<double>(differentials.size());
}

struct Differential {
  Phase phase{};
  Stat stat{};
  std::vector<double> differentials;  // winner team total minus loser team total, per game
  double fraction = std::numeric_limits<double>::quiet_NaN();
};

/// Per phase and stat; games without the phase snapshot are skipped.
inline std::vector<Differential> differential_summary(std::span<const data::GameRecord> games) {
  std::vector<Differential> out;
  for (Stat stat : all_values<Stat>()) {
    for (Phase phase : all_values<Phase>()) {
      Differential d{phase, stat, {}, 0.0};
      for (const auto& g : games) {
        double diff = 0.0;
        bool ok = true;
        for (const auto& p : g.players) {
          auto v = data::phase_value(p, phase, data::response_field(stat));
          if (!v) {
            ok = false;
            break;
          }
          diff += p.team == g.winner ? *v : -*v;
        }
        if (ok) d.differentials.push_back(diff);
      }
      d.fraction = fraction_positive(d.differentials);
      out.push_back(std::move(d));
    }
  }
  return out;
}

}  // namespace sido::analysis
