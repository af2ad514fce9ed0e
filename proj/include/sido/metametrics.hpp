#pragma once

// Meta-metrics for grading a score column: discrimination, independence
// and stability, plus the five-level impact categorization.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sido/error.hpp"
#include "sido/stats.hpp"

namespace sido::meta {

struct MetricColumn {
  std::string name;
  std::vector<std::string> account_ids;
  std::vector<double> scores;
  std::optional<std::vector<double>> sampling_variance;
};

struct Discrimination {
  double value = 0.0;
  bool degenerate = false;
};

/// 1 - mean(sampling variance) / var(scores), clamped to [0, 1].
inline Discrimination discrimination(std::span<const double> scores, std::span<const double> sampling_variance) {
  if (scores.size() < 3 || sampling_variance.size() != scores.size()) {
    throw DegenerateError("discrimination needs >= 3 accounts with sampling variances");
  }
  for (double v : sampling_variance) {
    if (v < 0.0) throw ValidationError("VARIANCE", "sampling variances must be >= 0");
  }
  const double total = stats::variance(scores);
  if (!(total > 0.0)) return {0.0, true};
  const double d = 1.0 - stats::mean(sampling_variance) / total;
  return {std::clamp(d, 0.0, 1.0), false};
}

inline Discrimination discrimination(const MetricColumn& column) {
  if (!column.sampling_variance) throw DegenerateError("discrimination needs sampling variances");
  return discrimination(column.scores, *column.sampling_variance);
}

/// Normal scores z = Phi^-1((rank - 0.5) / n), ties at their average rank.
inline std::vector<double> normal_scores(std::span<const double> x) {
  const auto ranks = stats::average_ranks(x);
  const double n = static_cast<double>(x.size());
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = stats::normal_quantile((ranks[i] - 0.5) / n);
  return z;
}

inline constexpr double kCopulaRidge = 1e-6;

/// Independence of each column from all others under a Gaussian copula:
/// columns are mapped to normal scores on their shared accounts, the
/// correlation matrix R is ridge-stabilized to (R + eps I) rescaled to unit
/// diagonal, and metric j scores 1 / (R^-1)_jj, its conditional variance
/// given the other metrics.
inline std::vector<double> independence(std::span<const MetricColumn> columns, std::size_t min_shared = 10) {
  if (columns.empty()) return {};
  if (columns.size() == 1) return {1.0};
  std::set<std::string> shared(columns[0].account_ids.begin(), columns[0].account_ids.end());
  for (std::size_t k = 1; k < columns.size(); ++k) {
    std::set<std::string> next;
    for (const auto& a : columns[k].account_ids) {
      if (shared.contains(a)) next.insert(a);
    }
    shared = std::move(next);
  }
  if (shared.size() < min_shared) {
    throw DegenerateError("independence needs >= " + std::to_string(min_shared) + " shared accounts, found " +
                          std::to_string(shared.size()));
  }
  const std::size_t n = shared.size(), m = columns.size();
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < m; ++k) {
    std::map<std::string, double> by_id;
    for (std::size_t i = 0; i < columns[k].account_ids.size(); ++i) {
      by_id[columns[k].account_ids[i]] = columns[k].scores[i];
    }
    std::vector<double> aligned;
    aligned.reserve(n);
    for (const auto& a : shared) aligned.push_back(by_id.at(a));
    const auto zs = normal_scores(aligned);
    for (std::size_t i = 0; i < n; ++i) z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = zs[i];
  }
  const Eigen::MatrixXd centered = z.rowwise() - z.colwise().mean();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  Eigen::VectorXd inv_sd = cov.diagonal().array().sqrt().inverse();
  Eigen::MatrixXd r = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
  r.diagonal().array() += kCopulaRidge;
  r /= (1.0 + kCopulaRidge);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(r);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-14) {
    throw DegenerateError("copula correlation matrix is singular");
  }
  const Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m),
                                                                  static_cast<Eigen::Index>(m)));
  std::vector<double> out(m);
  for (std::size_t k = 0; k < m; ++k) {
    out[k] = std::clamp(1.0 / inv(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)), 0.0, 1.0);
  }
  return out;
}

/// Fraction of unordered pairs ordered the same way in both samples; a pair
/// tied in either sample contributes 1/2. Inputs are aligned by position.
inline double concordance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("CONCORDANCE", "score vectors must be aligned");
  if (a.size() < 2) throw DegenerateError("concordance needs at least 2 shared accounts");
  double credit = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0 || db == 0.0) {
        credit += 0.5;
      } else if ((da > 0.0) == (db > 0.0)) {
        credit += 1.0;
      }
      ++pairs;
    }
  }
  return credit / static_cast<double>(pairs);
}

struct Stability {
  double value = 0.0;
  std::size_t n_shared = 0;
  double overlap = 0.0;  // shared / |union|
};

/// Concordance between two periods over the accounts present in both.
inline Stability concordance(const MetricColumn& first, const MetricColumn& second) {
  std::map<std::string, double> later;
  for (std::size_t i = 0; i < second.account_ids.size(); ++i) later[second.account_ids[i]] = second.scores[i];
  std::vector<std::pair<std::string, std::pair<double, double>>> shared;
  for (std::size_t i = 0; i < first.account_ids.size(); ++i) {
    auto it = later.find(first.account_ids[i]);
    if (it != later.end()) shared.push_back({first.account_ids[i], {first.scores[i], it->second}});
  }
  std::sort(shared.begin(), shared.end());
  std::vector<double> a, b;
  for (const auto& [id, v] : shared) {
    a.push_back(v.first);
    b.push_back(v.second);
  }
  Stability s;
  s.n_shared = shared.size();
  s.value = concordance(a, b);
  const std::size_t uni = first.account_ids.size() + second.account_ids.size() - shared.size();
  s.overlap = static_cast<double>(shared.size()) / static_cast<double>(uni);
  return s;
}

enum class ImpactCategory { HIGH_NEG = 1, LOW_NEG = 2, NEUTRAL = 3, LOW_POS = 4, HIGH_POS = 5 };

inline constexpr int rank(ImpactCategory c) { return static_cast<int>(c); }

inline std::string_view category_name(ImpactCategory c) {
  switch (c) {
    case ImpactCategory::HIGH_NEG:
      return "HIGH_NEG";
    case ImpactCategory::LOW_NEG:
      return "LOW_NEG";
    case ImpactCategory::NEUTRAL:
      return "NEUTRAL";
    case ImpactCategory::LOW_POS:
      return "LOW_POS";
    case ImpactCategory::HIGH_POS:
      return "HIGH_POS";
  }
  return "";
}

/// Category from the probability that the effect favors the player's team.
inline ImpactCategory categorize(double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("PROBABILITY", "sign probability must lie in [0, 1]");
  if (q >= 0.95) return ImpactCategory::HIGH_POS;
  if (q >= 0.75) return ImpactCategory::LOW_POS;
  if (q > 0.25) return ImpactCategory::NEUTRAL;
  if (q > 0.05) return ImpactCategory::LOW_NEG;
  return ImpactCategory::HIGH_NEG;
}

}  // namespace sido::meta
