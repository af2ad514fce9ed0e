#pragma once

// Synthetic observation tables drawn from known effects, used to validate
// inclusion thresholds and effect recovery.
//
// Streams: account i draws its effect from (seed, kTruthAccount, i), its
// availability pattern from (seed, kPattern, i) and its observations from
// (seed, kObservation, i); champion j draws from (seed, kTruthChampion, j).
// Growing n_accounts therefore leaves every existing account's draws intact.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sido/config.hpp"
#include "sido/data.hpp"
#include "sido/error.hpp"
#include "sido/inference.hpp"
#include "sido/rng.hpp"
#include "sido/stats.hpp"

namespace sido::synth {

enum class EffectLaw { StudentT3, Normal };
enum class PatternPreset { Balanced, LongTail, OneTrick };

inline std::optional<PatternPreset> parse_pattern(std::string_view s) {
  if (s == "balanced") return PatternPreset::Balanced;
  if (s == "long_tail" || s == "long-tail") return PatternPreset::LongTail;
  if (s == "one_trick" || s == "one-trick") return PatternPreset::OneTrick;
  return std::nullopt;
}

struct SynthConfig {
  std::size_t n_accounts = 300;
  std::size_t n_champions = 40;
  double tau = 0.3;
  double phi = 0.3;
  double sigma = 0.5;
  double beta0 = 0.0;
  std::optional<double> beta_dmgt;
  EffectLaw law = EffectLaw::StudentT3;
  PatternPreset pattern = PatternPreset::Balanced;
  int games_per_account = 60;  // mean games per account
  int min_games = 2;           // floor for the long-tail preset
  double one_trick_weight = 0.9;
  std::uint64_t seed = 1;

  /// Reads the documented keys: n_accounts, n_champions, tau, phi, sigma,
  /// beta0, beta_dmgt, law (t3|normal), pattern (balanced|long_tail|one_trick),
  /// games_per_account, min_games, seed.
  static SynthConfig from(const config::KeyValues& kv) {
    SynthConfig c;
    c.n_accounts = static_cast<std::size_t>(kv.get_int("n_accounts", static_cast<long long>(c.n_accounts)));
    c.n_champions = static_cast<std::size_t>(kv.get_int("n_champions", static_cast<long long>(c.n_champions)));
    c.tau = kv.get_double("tau", c.tau);
    c.phi = kv.get_double("phi", c.phi);
    c.sigma = kv.get_double("sigma", c.sigma);
    c.beta0 = kv.get_double("beta0", c.beta0);
    c.beta_dmgt = kv.get_optional_double("beta_dmgt");
    const auto law = kv.get_string("law", "t3");
    if (law == "t3") {
      c.law = EffectLaw::StudentT3;
    } else if (law == "normal") {
      c.law = EffectLaw::Normal;
    } else {
      throw ValidationError("CONFIG", "law must be t3 or normal");
    }
    auto pattern = parse_pattern(kv.get_string("pattern", "balanced"));
    if (!pattern) throw ValidationError("CONFIG", "pattern must be balanced, long_tail or one_trick");
    c.pattern = *pattern;
    c.games_per_account = static_cast<int>(kv.get_int("games_per_account", c.games_per_account));
    c.min_games = static_cast<int>(kv.get_int("min_games", c.min_games));
    c.seed = kv.get_u64("seed", c.seed);
    return c;
  }
};

struct TruthSet {
  double beta0 = 0.0;
  std::vector<std::string> account_ids;
  std::vector<double> account_effects;
  std::vector<std::string> champion_ids;
  std::vector<double> champion_effects;
  double sigma = 1.0;
  std::optional<double> beta_dmgt;
};

inline std::string padded_id(std::string_view prefix, std::size_t i, std::size_t n) {
  std::string digits = std::to_string(i);
  const std::size_t width = std::max<std::size_t>(4, std::to_string(n).size());
  return std::string(prefix) + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

inline TruthSet generate_truth(const SynthConfig& config, std::uint64_t seed) {
  if (config.n_accounts == 0 || config.n_champions == 0) {
    throw ValidationError("CONFIG", "n_accounts and n_champions must be positive");
  }
  if (config.tau < 0.0 || config.phi < 0.0 || !(config.sigma > 0.0)) {
    throw ValidationError("CONFIG", "tau and phi must be >= 0 and sigma > 0");
  }
  auto draw = [&](rng::Philox& g, double scale) {
    if (scale == 0.0) return 0.0;
    return config.law == EffectLaw::StudentT3 ? scale * g.student_t(3.0) : scale * g.normal();
  };
  TruthSet t;
  t.beta0 = config.beta0;
  t.sigma = config.sigma;
  t.beta_dmgt = config.beta_dmgt;
  for (std::size_t i = 0; i < config.n_accounts; ++i) {
    rng::Philox g(seed, rng::Purpose::kTruthAccount, i);
    t.account_ids.push_back(padded_id("acc", i, config.n_accounts));
    t.account_effects.push_back(draw(g, config.tau));
  }
  for (std::size_t j = 0; j < config.n_champions; ++j) {
    rng::Philox g(seed, rng::Purpose::kTruthChampion, j);
    t.champion_ids.push_back(padded_id("ch", j, config.n_champions));
    t.champion_effects.push_back(draw(g, config.phi));
  }
  return t;
}

/// Per-account game counts and champion-usage weights.
struct AvailabilityPattern {
  std::vector<int> game_counts;
  std::vector<std::vector<double>> champion_weights;  // rows sum to 1
};

/// Builds a preset pattern:
///   balanced  - every account plays games_per_account games; champion
///               weights are global popularity (j+1)^-1/2 times Gamma(1)
///               account-level noise.
///   long_tail - Zipf game counts, round(g_max / (i+1)) floored at
///               min_games, with g_max chosen so the mean is about
///               games_per_account; balanced champion weights.
///   one_trick - balanced counts; one_trick_weight of each account's usage
///               goes to a single main champion drawn by popularity.
inline AvailabilityPattern make_pattern(const SynthConfig& config, std::uint64_t seed) {
  const std::size_t n = config.n_accounts, c = config.n_champions;
  if (config.games_per_account < 1 || config.min_games < 1) {
    throw ValidationError("CONFIG", "games_per_account and min_games must be >= 1");
  }
  AvailabilityPattern p;
  double harmonic = 0.0;
  for (std::size_t i = 0; i < n; ++i) harmonic += 1.0 / static_cast<double>(i + 1);
  const double g_max = config.games_per_account * static_cast<double>(n) / harmonic;
  std::vector<double> popularity(c);
  for (std::size_t j = 0; j < c; ++j) popularity[j] = 1.0 / std::sqrt(static_cast<double>(j + 1));

  for (std::size_t i = 0; i < n; ++i) {
    rng::Philox g(seed, rng::Purpose::kPattern, i);
    int count = config.games_per_account;
    if (config.pattern == PatternPreset::LongTail) {
      count = std::max(config.min_games, static_cast<int>(std::lround(g_max / static_cast<double>(i + 1))));
    }
    p.game_counts.push_back(count);
    std::vector<double> w(c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      w[j] = popularity[j] * g.gamma(1.0);
      total += w[j];
    }
    for (auto& v : w) v /= total;
    if (config.pattern == PatternPreset::OneTrick && c > 1) {
      double u = g.uniform() * std::accumulate(popularity.begin(), popularity.end(), 0.0);
      std::size_t main = 0;
      while (main + 1 < c && u > popularity[main]) u -= popularity[main++];
      for (std::size_t j = 0; j < c; ++j) {
        w[j] = (1.0 - config.one_trick_weight) * w[j] + (j == main ? config.one_trick_weight : 0.0);
      }
    }
    p.champion_weights.push_back(std::move(w));
  }
  return p;
}

/// Responses y = beta0 + b_c + b_p [+ beta_dmgt x] + e, e ~ N(0, sigma^2),
/// x ~ N(0, 1). Responses are left on their generated scale (the table's
/// scale record is the identity).
inline data::ObservationTable generate_observations(const TruthSet& truth, const AvailabilityPattern& pattern,
                                                    std::uint64_t seed, const CellKey& key = {}) {
  if (pattern.game_counts.size() != truth.account_effects.size() ||
      pattern.champion_weights.size() != truth.account_effects.size()) {
    throw ValidationError("PATTERN", "pattern accounts must match truth accounts");
  }
  data::ObservationTable t;
  t.key = key;
  t.has_covariate = truth.beta_dmgt.has_value();
  t.account_ids = truth.account_ids;
  t.champion_ids = truth.champion_ids;
  for (std::size_t i = 0; i < truth.account_effects.size(); ++i) {
    const auto& w = pattern.champion_weights[i];
    if (w.size() != truth.champion_effects.size()) {
      throw ValidationError("PATTERN", "champion weights must cover every truth champion");
    }
    rng::Philox g(seed, rng::Purpose::kObservation, i);
    for (int k = 0; k < pattern.game_counts[i]; ++k) {
      double u = g.uniform();
      std::size_t champ = 0;
      while (champ + 1 < w.size() && u > w[champ]) u -= w[champ++];
      const double x = t.has_covariate ? g.normal() : 0.0;
      double y = truth.beta0 + truth.champion_effects[champ] + truth.account_effects[i] + g.normal(0.0, truth.sigma);
      if (t.has_covariate) y += *truth.beta_dmgt * x;
      t.rows.push_back({i, champ, y, x, truth.account_ids[i] + "_g" + std::to_string(k)});
    }
  }
  return t;
}

/// Drops index entries that have no rows (a champion nobody drew), so the
/// table can be fitted. Returns the compacted table.
inline data::ObservationTable compact(const data::ObservationTable& table) {
  std::vector<char> used_a(table.n_accounts(), 0), used_c(table.n_champions(), 0);
  for (const auto& r : table.rows) used_a[r.account] = used_c[r.champion] = 1;
  std::vector<std::size_t> map_a(used_a.size()), map_c(used_c.size());
  data::ObservationTable out = table;
  out.account_ids.clear();
  out.champion_ids.clear();
  for (std::size_t i = 0; i < used_a.size(); ++i) {
    if (used_a[i]) {
      map_a[i] = out.account_ids.size();
      out.account_ids.push_back(table.account_ids[i]);
    }
  }
  for (std::size_t j = 0; j < used_c.size(); ++j) {
    if (used_c[j]) {
      map_c[j] = out.champion_ids.size();
      out.champion_ids.push_back(table.champion_ids[j]);
    }
  }
  for (auto& r : out.rows) {
    r.account = map_a[r.account];
    r.champion = map_c[r.champion];
  }
  return out;
}

struct Recovery {
  double pearson = 0.0;
  double spearman = 0.0;
  double rmse = 0.0;  // after centering both vectors (contrasts only)
  std::size_t n = 0;
};

inline Recovery effect_recovery(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size()) throw ValidationError("RECOVERY", "length mismatch");
  if (estimate.size() < 3) throw DegenerateError("recovery needs at least 3 shared effects");
  Recovery r;
  r.n = estimate.size();
  r.pearson = stats::pearson(estimate, truth);
  r.spearman = stats::spearman(estimate, truth);
  const double me = stats::mean(estimate), mt = stats::mean(truth);
  double ss = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double d = (estimate[i] - me) - (truth[i] - mt);
    ss += d * d;
  }
  r.rmse = std::sqrt(ss / static_cast<double>(estimate.size()));
  return r;
}

struct RecoveryReport {
  Recovery accounts;
  Recovery champions;
};

/// Compares posterior-mean effects with the truth, matching by id.
inline RecoveryReport recovery_report(const infer::PosteriorFit& fit, const TruthSet& truth) {
  auto match = [](const std::vector<std::string>& fit_ids, const std::vector<double>& est,
                  const std::vector<std::string>& truth_ids, const std::vector<double>& truth_vals) {
    std::vector<double> e, t;
    for (std::size_t i = 0; i < fit_ids.size(); ++i) {
      auto it = std::lower_bound(truth_ids.begin(), truth_ids.end(), fit_ids[i]);
      if (it != truth_ids.end() && *it == fit_ids[i]) {
        e.push_back(est[i]);
        t.push_back(truth_vals[static_cast<std::size_t>(it - truth_ids.begin())]);
      }
    }
    return effect_recovery(e, t);
  };
  RecoveryReport r;
  r.accounts = match(fit.account_ids, infer::account_means(fit), truth.account_ids, truth.account_effects);
  r.champions = match(fit.champion_ids, infer::champion_means(fit), truth.champion_ids, truth.champion_effects);
  return r;
}

}  // namespace sido::synth
