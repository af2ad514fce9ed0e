#pragma once

// Comparison models: the per-account basic average (BA) and a ridge
// adjusted Plus-Minus (PM) with offensive and defensive coefficients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sido/data.hpp"
#include "sido/error.hpp"
#include "sido/rng.hpp"
#include "sido/scores.hpp"
#include "sido/stats.hpp"

namespace sido::baselines {

/// FNV-1a, used to give each account its own bootstrap stream independent of
/// which other accounts are present.
inline std::uint64_t id_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Basic average

struct BaScore {
  std::string account_id;
  CellKey key;
  double mean = 0.0;
  double se = 0.0;
  double positive_fraction = 0.0;  // share of bootstrap means > 0
  std::size_t n_games = 0;
  bool degenerate = false;  // single game: SE is 0 by construction
};

inline constexpr int kBaBootstrap = 200;

/// Per-account mean of the standardized response with a nonparametric
/// bootstrap SE over the account's games.
inline std::vector<BaScore> ba_scores(const data::ObservationTable& table, std::uint64_t seed, int n_boot = kBaBootstrap) {
  if (n_boot < 2) throw ValidationError("BOOTSTRAP", "need at least 2 bootstrap resamples");
  std::vector<std::vector<double>> by_account(table.n_accounts());
  for (const auto& r : table.rows) by_account[r.account].push_back(r.response);
  CellKey key = table.key;
  key.scope = Scope::BA;
  std::vector<BaScore> out;
  for (std::size_t a = 0; a < table.n_accounts(); ++a) {
    const auto& ys = by_account[a];
    if (ys.empty()) continue;
    BaScore s{table.account_ids[a], key, stats::mean(ys), 0.0, 0.0, ys.size(), ys.size() == 1};
    rng::Philox gen(seed, rng::Purpose::kBootstrap, id_hash(table.account_ids[a]));
    std::vector<double> means(static_cast<std::size_t>(n_boot));
    for (auto& m : means) {
      double sum = 0.0;
      for (std::size_t i = 0; i < ys.size(); ++i) sum += ys[gen.below(ys.size())];
      m = sum / static_cast<double>(ys.size());
    }
    s.se = s.degenerate ? 0.0 : stats::sd(means);
    s.positive_fraction =
        static_cast<double>(std::count_if(means.begin(), means.end(), [](double m) { return m > 0.0; })) /
        static_cast<double>(n_boot);
    out.push_back(s);
  }
  return out;
}

inline std::vector<ScoreRecord> ba_score_records(std::span<const BaScore> scores) {
  std::vector<ScoreRecord> out;
  for (const auto& s : scores) out.push_back({s.account_id, s.key, s.mean, s.se, s.positive_fraction, s.n_games});
  return out;
}

// ---------------------------------------------------------------------------
// Plus-Minus

/// One design row: the response and the columns carrying +1 and -1.
struct PmRow {
  double response = 0.0;
  std::vector<std::size_t> plus;
  std::vector<std::size_t> minus;
  std::string game_id;
};

/// Columns 0..n-1 are offensive coefficients, n..2n-1 defensive.
struct PmDesign {
  CellKey key;
  std::vector<std::string> player_ids;  // sorted
  std::vector<PmRow> rows;
  data::Scale response_scale;

  std::size_t n_players() const { return player_ids.size(); }
  std::size_t n_cols() const { return 2 * player_ids.size(); }
  std::size_t offense_col(std::size_t player) const { return player; }
  std::size_t defense_col(std::size_t player) const { return player_ids.size() + player; }
};

/// Two rows per game: each team's standardized phase total, with +1 in the
/// offensive column of its 5 players and -1 in the defensive column of the 5
/// opponents. Games lacking the phase snapshot are skipped. Role is ignored.
inline PmDesign pm_design(std::span<const data::GameRecord> games, CellKey key) {
  PmDesign d;
  key.role = Role::TOP;
  d.key = key;
  const auto field = data::response_field(key.stat);
  std::set<std::string> ids;
  struct Pending {
    double total;
    std::vector<std::string> team, opp;
    std::string game_id;
  };
  std::vector<Pending> pending;
  for (const auto& g : games) {
    if (g.server != key.server) continue;
    std::map<Team, double> total;
    bool ok = true;
    for (const auto& p : g.players) {
      auto v = data::phase_value(p, key.phase, field);
      if (!v) {
        ok = false;
        break;
      }
      total[p.team] += *v;
    }
    if (!ok) continue;
    for (Team t : all_values<Team>()) {
      Pending row{total[t], {}, {}, g.game_id};
      for (const auto& p : g.players) {
        (p.team == t ? row.team : row.opp).push_back(p.account_id);
        ids.insert(p.account_id);
      }
      pending.push_back(std::move(row));
    }
  }
  if (pending.empty()) throw DegenerateError("plus-minus design " + key.label() + " has no games");
  d.player_ids.assign(ids.begin(), ids.end());
  std::vector<double> y;
  for (const auto& r : pending) y.push_back(r.total);
  auto st = data::standardize(y);
  d.response_scale = st.scale;
  auto index = [&](const std::string& id) {
    return static_cast<std::size_t>(std::lower_bound(d.player_ids.begin(), d.player_ids.end(), id) -
                                    d.player_ids.begin());
  };
  for (std::size_t i = 0; i < pending.size(); ++i) {
    PmRow row{st.values[i], {}, {}, pending[i].game_id};
    for (const auto& id : pending[i].team) row.plus.push_back(d.offense_col(index(id)));
    for (const auto& id : pending[i].opp) row.minus.push_back(d.defense_col(index(id)));
    d.rows.push_back(std::move(row));
  }
  return d;
}

/// X w for the sparse signed design.
inline std::vector<double> pm_apply(const PmDesign& d, std::span<const double> w) {
  std::vector<double> out(d.rows.size(), 0.0);
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    double s = 0.0;
    for (auto c : d.rows[i].plus) s += w[c];
    for (auto c : d.rows[i].minus) s -= w[c];
    out[i] = s;
  }
  return out;
}

/// X^T v.
inline std::vector<double> pm_apply_transpose(const PmDesign& d, std::span<const double> v) {
  std::vector<double> out(d.n_cols(), 0.0);
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    for (auto c : d.rows[i].plus) out[c] += v[i];
    for (auto c : d.rows[i].minus) out[c] -= v[i];
  }
  return out;
}

struct PmFit {
  CellKey key;
  std::vector<std::string> player_ids;
  std::vector<double> offense;
  std::vector<double> defense;
  double lambda = 0.0;
  int iterations = 0;
  double relative_residual = 0.0;

  std::vector<double> coefficients() const {
    std::vector<double> w(offense);
    w.insert(w.end(), defense.begin(), defense.end());
    return w;
  }
};

inline double default_lambda(const PmDesign& d) { return 0.1 * static_cast<double>(d.rows.size()); }

/// Solves (X^T X + lambda I) w = X^T y for a response vector `y`.
inline PmFit solve_plus_minus(const PmDesign& d, std::span<const double> y, double lambda, double tol = 1e-8,
                              int max_iter = 0) {
  if (!(lambda > 0.0)) throw ValidationError("LAMBDA", "ridge strength must be > 0");
  if (y.size() != d.rows.size()) throw ValidationError("PM", "response length does not match design");
  const std::size_t n = d.n_cols();
  if (max_iter <= 0) max_iter = static_cast<int>(std::max<std::size_t>(1000, 10 * n));
  auto normal_op = [&](std::span<const double> v) {
    auto xt = pm_apply_transpose(d, pm_apply(d, v));
    for (std::size_t i = 0; i < n; ++i) xt[i] += lambda * v[i];
    return xt;
  };
  auto dot = [](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  const auto rhs = pm_apply_transpose(d, y);
  const double rhs_norm = std::sqrt(dot(rhs, rhs));
  std::vector<double> w(n, 0.0), r = rhs, p = rhs;
  PmFit fit{d.key, d.player_ids, {}, {}, lambda, 0, 0.0};
  double rr = dot(r, r);
  int it = 0;
  if (rhs_norm > 0.0) {
    while (std::sqrt(rr) / rhs_norm >= tol) {
      if (it == max_iter) {
        throw ConvergenceError("plus-minus CG stopped after " + std::to_string(it) +
                               " iterations at relative residual " + std::to_string(std::sqrt(rr) / rhs_norm));
      }
      const auto ap = normal_op(p);
      const double alpha = rr / dot(p, ap);
      for (std::size_t i = 0; i < n; ++i) {
        w[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      const double rr_next = dot(r, r);
      const double beta = rr_next / rr;
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
      rr = rr_next;
      ++it;
    }
  }
  fit.iterations = it;
  fit.relative_residual = rhs_norm > 0.0 ? std::sqrt(rr) / rhs_norm : 0.0;
  fit.offense.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(d.n_players()));
  fit.defense.assign(w.begin() + static_cast<std::ptrdiff_t>(d.n_players()), w.end());
  return fit;
}

inline PmFit fit_plus_minus(const PmDesign& d, double lambda) {
  std::vector<double> y;
  y.reserve(d.rows.size());
  for (const auto& r : d.rows) y.push_back(r.response);
  return solve_plus_minus(d, y, lambda);
}

struct PmUncertainty {
  std::vector<double> offense_sd, defense_sd;
  std::vector<double> offense_positive, defense_positive;  // share of resamples > 0
};

inline constexpr int kPmBootstrap = 100;

/// Parametric bootstrap: responses are redrawn as X w + N(0, s^2) with s^2
/// the mean squared residual of the fit, and the ridge problem re-solved.
inline PmUncertainty pm_bootstrap(const PmDesign& d, const PmFit& fit, std::uint64_t seed, int n_boot = kPmBootstrap) {
  if (n_boot < 2) throw ValidationError("BOOTSTRAP", "need at least 2 bootstrap resamples");
  const auto w = fit.coefficients();
  const auto mu = pm_apply(d, w);
  double rss = 0.0;
  for (std::size_t i = 0; i < d.rows.size(); ++i) rss += (d.rows[i].response - mu[i]) * (d.rows[i].response - mu[i]);
  const double s = std::sqrt(rss / static_cast<double>(d.rows.size()));
  const std::size_t n = d.n_cols();
  std::vector<std::vector<double>> draws(n);
  std::vector<double> y(d.rows.size());
  for (int b = 0; b < n_boot; ++b) {
    rng::Philox gen(seed, rng::Purpose::kParametricBootstrap, static_cast<std::uint64_t>(b));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = mu[i] + s * gen.normal();
    const auto refit = solve_plus_minus(d, y, fit.lambda).coefficients();
    for (std::size_t j = 0; j < n; ++j) draws[j].push_back(refit[j]);
  }
  PmUncertainty u;
  for (std::size_t j = 0; j < n; ++j) {
    const double sd = stats::sd(draws[j]);
    const double pos = static_cast<double>(std::count_if(draws[j].begin(), draws[j].end(),
                                                         [](double v) { return v > 0.0; })) /
                       static_cast<double>(n_boot);
    if (j < d.n_players()) {
      u.offense_sd.push_back(sd);
      u.offense_positive.push_back(pos);
    } else {
      u.defense_sd.push_back(sd);
      u.defense_positive.push_back(pos);
    }
  }
  return u;
}

/// PM_OFF and PM_DEF records for `accounts` (all players when empty),
/// labeled with `role` so they line up with the per-role SIDO cells.
inline std::vector<ScoreRecord> pm_score_records(const PmFit& fit, const PmUncertainty* u, Role role,
                                                 const std::set<std::string>& accounts = {}) {
  std::vector<ScoreRecord> out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < fit.player_ids.size(); ++i) {
    if (!accounts.empty() && !accounts.contains(fit.player_ids[i])) continue;
    CellKey key = fit.key;
    key.role = role;
    key.scope = Scope::PM_OFF;
    out.push_back({fit.player_ids[i], key, fit.offense[i], u ? u->offense_sd[i] : nan,
                   u ? u->offense_positive[i] : nan, 0});
    key.scope = Scope::PM_DEF;
    out.push_back({fit.player_ids[i], key, fit.defense[i], u ? u->defense_sd[i] : nan,
                   u ? u->defense_positive[i] : nan, 0});
  }
  return out;
}

}  // namespace sido::baselines
