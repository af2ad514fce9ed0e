#pragma once

// Split R-hat and effective sample size.
//
// Both follow the split-chain construction: every chain of N draws is cut
// into two halves of floor(N/2) draws (the middle draw is dropped when N is
// odd), giving m = 2M sequences of n draws.
//
//   W      = mean of within-sequence sample variances
//   B      = n / (m - 1) * sum_j (mean_j - grand_mean)^2
//   var+   = (n - 1) / n * W + B / n
//   R-hat  = sqrt(var+ / W)
//
// ESS uses the multi-chain autocorrelation estimate
//   rho_t = 1 - (W - mean_j acov_j(t)) / var+
// with Geyer's initial monotone positive sequence truncation, and
// ESS = m n / (-1 + 2 sum_k P_k), P_k = rho_2k + rho_2k+1. The result is
// capped at the total number of draws.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "sido/error.hpp"

namespace sido::diag {

struct ParameterDiagnostics {
  double rhat = std::numeric_limits<double>::quiet_NaN();
  double ess = std::numeric_limits<double>::quiet_NaN();
  bool degenerate = false;  // zero within-chain variance
};

/// `chains[c]` holds the draws of chain c; all chains must have equal length.
inline ParameterDiagnostics split_rhat_ess(std::span<const std::span<const double>> chains) {
  if (chains.size() < 2) throw DegenerateError("diagnostics need at least 2 chains");
  const std::size_t n_full = chains[0].size();
  for (auto c : chains) {
    if (c.size() != n_full) throw DegenerateError("diagnostics need equal-length chains");
  }
  const std::size_t n = n_full / 2;
  if (n < 2) throw DegenerateError("diagnostics need at least 4 draws per chain");

  std::vector<std::span<const double>> seqs;
  for (auto c : chains) {
    seqs.push_back(c.subspan(0, n));
    seqs.push_back(c.subspan(n_full - n, n));
  }
  const std::size_t m = seqs.size();
  const double nd = static_cast<double>(n);

  std::vector<double> means(m), vars(m);
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (double v : seqs[j]) s += v;
    means[j] = s / nd;
    double ss = 0.0;
    for (double v : seqs[j]) ss += (v - means[j]) * (v - means[j]);
    vars[j] = ss / (nd - 1.0);
  }
  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= static_cast<double>(m);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= nd / static_cast<double>(m - 1);
  double w = 0.0;
  for (double v : vars) w += v;
  w /= static_cast<double>(m);

  ParameterDiagnostics out;
  if (!(w > 0.0)) {
    out.degenerate = true;
    return out;
  }
  const double var_plus = (nd - 1.0) / nd * w + b / nd;
  out.rhat = std::sqrt(var_plus / w);

  // Autocovariance (1/n normalisation) averaged over sequences, lag by lag.
  auto mean_acov = [&](std::size_t lag) {
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) s += (seqs[j][i] - means[j]) * (seqs[j][i + lag] - means[j]);
      total += s / nd;
    }
    return total / static_cast<double>(m);
  };
  const double w_acov = mean_acov(0) * nd / (nd - 1.0);
  auto rho = [&](std::size_t lag) { return 1.0 - (w_acov - mean_acov(lag)) / var_plus; };

  double sum_pairs = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double r0 = k == 0 ? 1.0 : rho(2 * k);
    double pair = r0 + rho(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    sum_pairs += pair;
    prev_pair = pair;
  }
  const double tau = -1.0 + 2.0 * sum_pairs;
  const double total = static_cast<double>(m) * nd;
  out.ess = tau > 0.0 ? std::min(total / tau, total) : total;
  return out;
}

}  // namespace sido::diag
