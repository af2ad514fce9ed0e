#pragma once

// Bayesian hierarchical regression with crossed account and champion
// random effects,
//
//   y_i = beta0 + [beta_x * x_i] + b_champion(i) + b_account(i) + e_i,
//   e_i ~ N(0, sigma^2),
//   beta0 ~ N(0, s0^2), beta_x ~ N(0, sx^2),
//   b_account ~ t_nu(0, tau), b_champion ~ t_nu(0, phi),
//   tau, phi ~ HalfCauchy(A), sigma ~ HalfCauchy(A_sigma),
//
// fitted by Gibbs sampling. Every conditional is conjugate through
// auxiliary-variable representations:
//
//   * t_nu(0, s) effect:  b | w ~ N(0, s^2 w),  w ~ InvGamma(nu/2, nu/2)
//   * HalfCauchy(A) scale: s^2 | a ~ InvGamma(1/2, 1/a), a ~ InvGamma(1/2, 1/A^2)
//
// The intercept is drawn jointly with one effect block at a time (first with
// the champion effects, then with the account effects). The intercept is
// integrated out of the block analytically, which removes the slow
// intercept/effect-mean random walk a one-at-a-time sweep suffers from.
// Each sweep ends with a scale-group move per effect block (the block and
// its scale rescaled together by g, with a Metropolis step on log g), which
// keeps chains moving when an effect scale is near zero.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "sido/data.hpp"
#include "sido/diagnostics.hpp"
#include "sido/error.hpp"
#include "sido/rng.hpp"
#include "sido/stats.hpp"

namespace sido::infer {

struct ModelConfig {
  bool has_covariate = false;
  double intercept_sd = 1.0;
  double covariate_sd = 1.0;
  double effect_scale_prior = 0.5;  // half-Cauchy scale for tau and phi
  double noise_scale_prior = 0.3;   // half-Cauchy scale for sigma
  /// Degrees of freedom of the effect law; infinity gives Normal effects.
  double effect_dof = 3.0;
  int chains = 4;
  int warmup = 1000;
  int draws = 1000;
  std::uint64_t seed = 1;

  // Pinned values, used by the conjugate sub-case and sensitivity runs.
  std::optional<double> fixed_tau;
  std::optional<double> fixed_phi;
  std::optional<double> fixed_sigma;
  std::optional<double> fixed_intercept;

  bool normal_effects() const { return std::isinf(effect_dof); }

  void validate() const {
    if (chains < 2) throw ValidationError("CONFIG", "chains must be >= 2");
    if (draws < 100) throw ValidationError("CONFIG", "draws must be >= 100");
    if (warmup < 0) throw ValidationError("CONFIG", "warmup must be >= 0");
    for (double s : {intercept_sd, covariate_sd, effect_scale_prior, noise_scale_prior, effect_dof}) {
      if (!(s > 0.0)) throw ValidationError("CONFIG", "prior scales and dof must be > 0");
    }
    for (const auto& f : {fixed_tau, fixed_phi, fixed_sigma}) {
      if (f && !(*f > 0.0)) throw ValidationError("CONFIG", "pinned scales must be > 0");
    }
  }
};

struct ConvergenceGate {
  double max_rhat = 1.05;
  double min_ess = 100.0;
};

/// Draws of every parameter, stored parameter-major then chain-major.
///
/// Parameter order: beta0, [beta_dmgt], tau, phi, sigma, b_p[0..P), b_c[0..C).
struct PosteriorFit {
  ModelConfig config;
  CellKey identity;
  std::vector<std::string> param_names;
  std::vector<std::string> account_ids;
  std::vector<std::string> champion_ids;
  std::size_t n_chains = 0;
  std::size_t n_draws = 0;
  std::vector<double> draws;
  std::vector<std::string> warnings;

  std::size_t n_params() const { return param_names.size(); }
  std::size_t n_accounts() const { return account_ids.size(); }
  std::size_t n_champions() const { return champion_ids.size(); }

  std::size_t intercept_param() const { return 0; }
  std::optional<std::size_t> covariate_param() const {
    if (!config.has_covariate) return std::nullopt;
    return 1;
  }
  std::size_t tau_param() const { return config.has_covariate ? 2 : 1; }
  std::size_t phi_param() const { return tau_param() + 1; }
  std::size_t sigma_param() const { return tau_param() + 2; }
  std::size_t account_param(std::size_t account) const { return tau_param() + 3 + account; }
  std::size_t champion_param(std::size_t champion) const { return account_param(n_accounts()) + champion; }

  std::optional<std::size_t> param_index(const std::string& name) const {
    auto it = std::find(param_names.begin(), param_names.end(), name);
    if (it == param_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - param_names.begin());
  }

  std::span<const double> chain(std::size_t param, std::size_t c) const {
    return std::span<const double>(draws).subspan((param * n_chains + c) * n_draws, n_draws);
  }
  /// All post-warmup draws of one parameter, chains concatenated.
  std::span<const double> pooled(std::size_t param) const {
    return std::span<const double>(draws).subspan(param * n_chains * n_draws, n_chains * n_draws);
  }
  std::span<double> pooled_mut(std::size_t param) {
    return std::span<double>(draws).subspan(param * n_chains * n_draws, n_chains * n_draws);
  }
};

inline std::vector<std::string> parameter_names(bool has_covariate, std::size_t n_accounts,
                                                std::size_t n_champions) {
  std::vector<std::string> names{"beta0"};
  if (has_covariate) names.push_back("beta_dmgt");
  names.insert(names.end(), {"tau", "phi", "sigma"});
  for (std::size_t i = 0; i < n_accounts; ++i) names.push_back("b_p[" + std::to_string(i) + "]");
  for (std::size_t j = 0; j < n_champions; ++j) names.push_back("b_c[" + std::to_string(j) + "]");
  return names;
}

namespace detail {

struct Problem {
  std::vector<double> y;
  std::vector<double> x;
  std::vector<std::size_t> account;
  std::vector<std::size_t> champion;
  std::vector<double> n_account;
  std::vector<double> n_champion;
  double sum_x2 = 0.0;
  std::size_t n_acc = 0;
  std::size_t n_champ = 0;
};

inline Problem make_problem(const data::ObservationTable& table) {
  Problem p;
  p.n_acc = table.n_accounts();
  p.n_champ = table.n_champions();
  p.n_account.assign(p.n_acc, 0.0);
  p.n_champion.assign(p.n_champ, 0.0);
  for (const auto& r : table.rows) {
    if (r.account >= p.n_acc || r.champion >= p.n_champ) {
      throw ValidationError("INDEX", "row index outside the table's index space");
    }
    p.y.push_back(r.response);
    p.x.push_back(r.covariate);
    p.account.push_back(r.account);
    p.champion.push_back(r.champion);
    p.n_account[r.account] += 1.0;
    p.n_champion[r.champion] += 1.0;
    p.sum_x2 += r.covariate * r.covariate;
  }
  for (std::size_t i = 0; i < p.n_acc; ++i) {
    if (p.n_account[i] == 0.0) {
      throw DegenerateError("account index " + std::to_string(i) + " (" + table.account_ids[i] + ") has no rows");
    }
  }
  for (std::size_t j = 0; j < p.n_champ; ++j) {
    if (p.n_champion[j] == 0.0) {
      throw DegenerateError("champion index " + std::to_string(j) + " (" + table.champion_ids[j] + ") has no rows");
    }
  }
  return p;
}

/// One chain's sampler state and update rules.
class Chain {
 public:
  Chain(const Problem& p, const ModelConfig& cfg, std::size_t chain_index)
      : p_(p), cfg_(cfg), rng_(cfg.seed, rng::Purpose::kChain, chain_index) {
    b_acc_.resize(p.n_acc);
    b_champ_.resize(p.n_champ);
    w_acc_.assign(p.n_acc, 1.0);
    w_champ_.assign(p.n_champ, 1.0);
    h_.reserve(std::max(p.n_acc, p.n_champ));
    // Dispersed starting points.
    beta0_ = cfg.fixed_intercept.value_or(rng_.normal(0.0, 0.5));
    tau2_ = square(cfg.fixed_tau.value_or(0.1 + 0.9 * rng_.uniform()));
    phi2_ = square(cfg.fixed_phi.value_or(0.1 + 0.9 * rng_.uniform()));
    sigma2_ = square(cfg.fixed_sigma.value_or(0.2 + 0.8 * rng_.uniform()));
    for (auto& b : b_acc_) b = rng_.normal(0.0, std::sqrt(tau2_));
    for (auto& b : b_champ_) b = rng_.normal(0.0, std::sqrt(phi2_));
    a_tau_ = a_phi_ = a_sigma_ = 1.0;
  }

  void step() {
    update_block(b_champ_, p_.champion, p_.n_champion, w_champ_, phi2_, b_acc_, p_.account);
    update_block(b_acc_, p_.account, p_.n_account, w_acc_, tau2_, b_champ_, p_.champion);
    if (cfg_.has_covariate) update_covariate();
    if (!cfg_.normal_effects()) {
      update_mixing(b_acc_, w_acc_, tau2_);
      update_mixing(b_champ_, w_champ_, phi2_);
    }
    if (!cfg_.fixed_tau) {
      update_scale(b_acc_, w_acc_, tau2_, a_tau_, cfg_.effect_scale_prior);
      rescale_block(b_acc_, p_.account, p_.n_account, b_champ_, p_.champion, tau2_, a_tau_);
    }
    if (!cfg_.fixed_phi) {
      update_scale(b_champ_, w_champ_, phi2_, a_phi_, cfg_.effect_scale_prior);
      rescale_block(b_champ_, p_.champion, p_.n_champion, b_acc_, p_.account, phi2_, a_phi_);
    }
    if (!cfg_.fixed_sigma) update_sigma();
  }

  /// Appends the current state in parameter order.
  void record(std::vector<double>& out) const {
    out.push_back(beta0_);
    if (cfg_.has_covariate) out.push_back(beta_x_);
    out.push_back(std::sqrt(tau2_));
    out.push_back(std::sqrt(phi2_));
    out.push_back(std::sqrt(sigma2_));
    out.insert(out.end(), b_acc_.begin(), b_acc_.end());
    out.insert(out.end(), b_champ_.begin(), b_champ_.end());
  }

 private:
  static double square(double v) { return v * v; }

  /// Draws (beta0, block) jointly given the other effect block.
  ///
  /// With r_i = y_i - beta_x x_i - other_i, block member k has data
  /// precision a_k = n_k / sigma^2, prior precision 1/v_k and
  /// D_k = a_k + 1/v_k. Integrating the block out leaves beta0 Gaussian with
  ///   precision 1/s0^2 + sum_k a_k (1/v_k) / D_k,
  ///   linear term   sum_k h_k (1/v_k) / D_k,   h_k = sum_{i in k} r_i / sigma^2,
  /// after which block_k | beta0 ~ N((h_k - a_k beta0) / D_k, 1 / D_k).
  void update_block(std::vector<double>& block, const std::vector<std::size_t>& member,
                    const std::vector<double>& count, const std::vector<double>& mixing, double scale2,
                    const std::vector<double>& other, const std::vector<std::size_t>& other_member) {
    const std::size_t k_n = block.size();
    h_.assign(k_n, 0.0);
    const double inv_s2 = 1.0 / sigma2_;
    for (std::size_t i = 0; i < p_.y.size(); ++i) {
      double r = p_.y[i] - other[other_member[i]];
      if (cfg_.has_covariate) r -= beta_x_ * p_.x[i];
      h_[member[i]] += r;
    }
    if (!cfg_.fixed_intercept) {
      double prec = 1.0 / square(cfg_.intercept_sd);
      double lin = 0.0;
      for (std::size_t k = 0; k < k_n; ++k) {
        const double a = count[k] * inv_s2;
        const double prior_prec = 1.0 / (scale2 * mixing[k]);
        const double d = a + prior_prec;
        prec += a * prior_prec / d;
        lin += h_[k] * inv_s2 * prior_prec / d;
      }
      beta0_ = rng_.normal(lin / prec, 1.0 / std::sqrt(prec));
    }
    for (std::size_t k = 0; k < k_n; ++k) {
      const double a = count[k] * inv_s2;
      const double d = a + 1.0 / (scale2 * mixing[k]);
      block[k] = rng_.normal((h_[k] * inv_s2 - a * beta0_) / d, 1.0 / std::sqrt(d));
    }
  }

  void update_covariate() {
    double lin = 0.0;
    for (std::size_t i = 0; i < p_.y.size(); ++i) {
      lin += p_.x[i] * (p_.y[i] - beta0_ - b_acc_[p_.account[i]] - b_champ_[p_.champion[i]]);
    }
    const double prec = p_.sum_x2 / sigma2_ + 1.0 / square(cfg_.covariate_sd);
    beta_x_ = rng_.normal(lin / sigma2_ / prec, 1.0 / std::sqrt(prec));
  }

  void update_mixing(const std::vector<double>& block, std::vector<double>& mixing, double scale2) {
    const double nu = cfg_.effect_dof;
    for (std::size_t k = 0; k < block.size(); ++k) {
      mixing[k] = rng_.inv_gamma(0.5 * (nu + 1.0), 0.5 * (nu + block[k] * block[k] / scale2));
    }
  }

  void update_scale(const std::vector<double>& block, const std::vector<double>& mixing, double& scale2,
                    double& aux, double prior_scale) {
    double ss = 0.0;
    for (std::size_t k = 0; k < block.size(); ++k) ss += block[k] * block[k] / mixing[k];
    scale2 = rng_.inv_gamma(0.5 * (static_cast<double>(block.size()) + 1.0), 0.5 * ss + 1.0 / aux);
    aux = rng_.inv_gamma(1.0, 1.0 / scale2 + 1.0 / square(prior_scale));
  }

  /// Scale-group move: (block, scale2) -> (g block, g^2 scale2), g > 0.
  /// Relative to the Haar measure dg/g the conditional of g is
  ///   N(g; m, v) * g^-1 * exp(-1 / (aux scale2 g^2)),
  /// where N(g; m, v) is the likelihood of the partial residuals under
  /// g * block; the effect prior and mixing terms cancel. Random-walk
  /// Metropolis on u = log g started at g = 1 leaves the joint posterior
  /// invariant.
  void rescale_block(std::vector<double>& block, const std::vector<std::size_t>& member,
                     const std::vector<double>& count, const std::vector<double>& other,
                     const std::vector<std::size_t>& other_member, double& scale2, double aux) {
    const std::size_t k_n = block.size();
    h_.assign(k_n, 0.0);
    for (std::size_t i = 0; i < p_.y.size(); ++i) {
      double r = p_.y[i] - beta0_ - other[other_member[i]];
      if (cfg_.has_covariate) r -= beta_x_ * p_.x[i];
      h_[member[i]] += r;
    }
    double quad = 0.0, lin = 0.0;
    for (std::size_t k = 0; k < k_n; ++k) {
      quad += count[k] * block[k] * block[k];
      lin += h_[k] * block[k];
    }
    if (!(quad > 0.0)) return;
    const double c = 1.0 / (aux * scale2);
    auto log_target = [&](double u) {
      const double g = std::exp(u);
      return (lin * g - 0.5 * quad * g * g) / sigma2_ - u - c / (g * g);
    };
    // Proposal width from the curvature of the likelihood term at g = 1.
    const double step = std::clamp(2.4 * std::sqrt(sigma2_ / quad), 0.01, 1.0);
    // The target is O(1) to evaluate, so several Metropolis iterations are cheap.
    double u = 0.0, current = log_target(0.0);
    for (int it = 0; it < 8; ++it) {
      const double proposal = u + step * rng_.normal();
      const double next = log_target(proposal);
      if (std::log(rng_.uniform()) < next - current) {
        u = proposal;
        current = next;
      }
    }
    if (u != 0.0) {
      const double g = std::exp(u);
      for (auto& b : block) b *= g;
      scale2 *= g * g;
    }
  }

  void update_sigma() {
    double ssr = 0.0;
    for (std::size_t i = 0; i < p_.y.size(); ++i) {
      double r = p_.y[i] - beta0_ - b_acc_[p_.account[i]] - b_champ_[p_.champion[i]];
      if (cfg_.has_covariate) r -= beta_x_ * p_.x[i];
      ssr += r * r;
    }
    sigma2_ = rng_.inv_gamma(0.5 * (static_cast<double>(p_.y.size()) + 1.0), 0.5 * ssr + 1.0 / a_sigma_);
    a_sigma_ = rng_.inv_gamma(1.0, 1.0 / sigma2_ + 1.0 / square(cfg_.noise_scale_prior));
  }

  const Problem& p_;
  const ModelConfig& cfg_;
  rng::Philox rng_;
  double beta0_ = 0.0;
  double beta_x_ = 0.0;
  double tau2_ = 1.0, phi2_ = 1.0, sigma2_ = 1.0;
  double a_tau_ = 1.0, a_phi_ = 1.0, a_sigma_ = 1.0;
  std::vector<double> b_acc_, b_champ_, w_acc_, w_champ_, h_;
};

}  // namespace detail

struct Diagnostics {
  std::vector<diag::ParameterDiagnostics> per_param;
  bool converged = true;
  std::vector<std::string> failing;  // gated parameters that missed the gate
};

/// Split R-hat and ESS for every parameter; the gate is applied to beta0,
/// tau, phi and sigma (pinned, i.e. constant, parameters are skipped).
inline Diagnostics diagnostics(const PosteriorFit& fit, const ConvergenceGate& gate = {}) {
  if (fit.n_chains < 2) throw DegenerateError("diagnostics need at least 2 chains");
  Diagnostics d;
  d.per_param.reserve(fit.n_params());
  std::vector<std::span<const double>> chains(fit.n_chains);
  for (std::size_t p = 0; p < fit.n_params(); ++p) {
    for (std::size_t c = 0; c < fit.n_chains; ++c) chains[c] = fit.chain(p, c);
    d.per_param.push_back(diag::split_rhat_ess(chains));
  }
  std::vector<std::size_t> gated{fit.intercept_param(), fit.tau_param(), fit.phi_param(), fit.sigma_param()};
  for (std::size_t p : gated) {
    const auto& pd = d.per_param[p];
    if (pd.degenerate) continue;
    if (!(pd.rhat < gate.max_rhat) || !(pd.ess > gate.min_ess)) {
      d.converged = false;
      d.failing.push_back(fit.param_names[p]);
    }
  }
  return d;
}

/// Runs the Gibbs sampler on `table`. Chains run on separate threads with
/// independent streams; results depend only on (table, config).
inline PosteriorFit fit_hierarchical(const data::ObservationTable& table, ModelConfig config,
                                     const ConvergenceGate& gate = {}) {
  config.validate();
  if (table.rows.empty()) throw DegenerateError("cannot fit an empty table");
  if (config.has_covariate && !table.has_covariate) {
    throw ValidationError("COVARIATE", "model expects a covariate but table " + table.key.label() + " has none");
  }
  const detail::Problem problem = detail::make_problem(table);

  PosteriorFit fit;
  fit.config = config;
  fit.identity = table.key;
  fit.account_ids = table.account_ids;
  fit.champion_ids = table.champion_ids;
  fit.param_names = parameter_names(config.has_covariate, problem.n_acc, problem.n_champ);
  fit.n_chains = static_cast<std::size_t>(config.chains);
  fit.n_draws = static_cast<std::size_t>(config.draws);
  const std::size_t n_params = fit.param_names.size();

  // per_chain[c] is draw-major; transposed into the fit afterwards.
  std::vector<std::vector<double>> per_chain(fit.n_chains);
  auto run_chain = [&](std::size_t c) {
    detail::Chain chain(problem, config, c);
    for (int it = 0; it < config.warmup; ++it) chain.step();
    auto& out = per_chain[c];
    out.reserve(n_params * fit.n_draws);
    for (std::size_t d = 0; d < fit.n_draws; ++d) {
      chain.step();
      chain.record(out);
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (hw > 1) {
    std::vector<std::jthread> workers;
    for (std::size_t c = 0; c < fit.n_chains; ++c) workers.emplace_back(run_chain, c);
  } else {
    for (std::size_t c = 0; c < fit.n_chains; ++c) run_chain(c);
  }

  fit.draws.resize(n_params * fit.n_chains * fit.n_draws);
  for (std::size_t c = 0; c < fit.n_chains; ++c) {
    for (std::size_t d = 0; d < fit.n_draws; ++d) {
      const double* row = per_chain[c].data() + d * n_params;
      for (std::size_t p = 0; p < n_params; ++p) fit.draws[(p * fit.n_chains + c) * fit.n_draws + d] = row[p];
    }
  }
  const auto diag = diagnostics(fit, gate);
  if (!diag.converged) {
    std::string names;
    for (const auto& n : diag.failing) names += (names.empty() ? "" : ",") + n;
    fit.warnings.push_back("convergence gate not met (R-hat < " + csv::format_double(gate.max_rhat) +
                           ", ESS > " + csv::format_double(gate.min_ess) + ") for: " + names);
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Posterior summaries

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
};

inline Summary summarize_draws(std::span<const double> draws) {
  std::vector<double> s(draws.begin(), draws.end());
  std::sort(s.begin(), s.end());
  Summary out;
  out.mean = stats::mean(draws);
  double ss = 0.0;
  for (double v : draws) ss += (v - out.mean) * (v - out.mean);
  out.sd = draws.size() > 1 ? std::sqrt(ss / static_cast<double>(draws.size() - 1)) : 0.0;
  out.q05 = stats::quantile_sorted(s, 0.05);
  out.q50 = stats::quantile_sorted(s, 0.50);
  out.q95 = stats::quantile_sorted(s, 0.95);
  return out;
}

/// Summary per parameter, in parameter order.
inline std::vector<Summary> posterior_summary(const PosteriorFit& fit) {
  std::vector<Summary> out;
  out.reserve(fit.n_params());
  for (std::size_t p = 0; p < fit.n_params(); ++p) out.push_back(summarize_draws(fit.pooled(p)));
  return out;
}

/// Summaries of b_p / tau per account, computed draw by draw.
inline std::vector<Summary> relative_account_summary(const PosteriorFit& fit) {
  std::vector<Summary> out;
  const auto tau = fit.pooled(fit.tau_param());
  std::vector<double> ratio(tau.size());
  for (std::size_t a = 0; a < fit.n_accounts(); ++a) {
    const auto b = fit.pooled(fit.account_param(a));
    for (std::size_t i = 0; i < b.size(); ++i) ratio[i] = b[i] / tau[i];
    out.push_back(summarize_draws(ratio));
  }
  return out;
}

inline std::vector<double> posterior_means(const PosteriorFit& fit) {
  std::vector<double> out(fit.n_params());
  for (std::size_t p = 0; p < fit.n_params(); ++p) out[p] = stats::mean(fit.pooled(p));
  return out;
}

inline std::vector<double> account_means(const PosteriorFit& fit) {
  std::vector<double> out(fit.n_accounts());
  for (std::size_t a = 0; a < out.size(); ++a) out[a] = stats::mean(fit.pooled(fit.account_param(a)));
  return out;
}

inline std::vector<double> champion_means(const PosteriorFit& fit) {
  std::vector<double> out(fit.n_champions());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = stats::mean(fit.pooled(fit.champion_param(c)));
  return out;
}

struct PredictRow {
  std::size_t account = 0;
  std::size_t champion = 0;
  double covariate = 0.0;
};

/// Posterior-mean plug-in predictions. Precomputed means may be passed to
/// avoid recomputing them per call.
inline std::vector<double> predict(const PosteriorFit& fit, std::span<const PredictRow> rows,
                                   const std::vector<double>* means = nullptr) {
  std::vector<double> local;
  if (!means) {
    local = posterior_means(fit);
    means = &local;
  }
  const auto& m = *means;
  const double slope = fit.covariate_param() ? m[*fit.covariate_param()] : 0.0;
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.account >= fit.n_accounts()) {
      throw ValidationError("INDEX", "unknown account index " + std::to_string(r.account));
    }
    if (r.champion >= fit.n_champions()) {
      throw ValidationError("INDEX", "unknown champion index " + std::to_string(r.champion));
    }
    out.push_back(m[fit.intercept_param()] + m[fit.champion_param(r.champion)] + m[fit.account_param(r.account)] +
                  slope * r.covariate);
  }
  return out;
}

inline double sign_probability(std::span<const double> draws) {
  if (draws.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto positive = std::count_if(draws.begin(), draws.end(), [](double v) { return v > 0.0; });
  return static_cast<double>(positive) / static_cast<double>(draws.size());
}

/// Fraction of post-warmup draws of `param` that are > 0.
inline double sign_probability(const PosteriorFit& fit, std::size_t param) {
  if (param >= fit.n_params()) throw ValidationError("INDEX", "unknown parameter index " + std::to_string(param));
  return sign_probability(fit.pooled(param));
}

inline double sign_probability(const PosteriorFit& fit, const std::string& name) {
  auto p = fit.param_index(name);
  if (!p) throw ValidationError("INDEX", "unknown parameter " + name);
  return sign_probability(fit, *p);
}

// ---------------------------------------------------------------------------
// Prior predictive check

struct PriorPredictive {
  std::vector<double> response_sd;  // one per prior draw
  double fraction_in_range = 0.0;   // share with sd in [lo, hi]
};

/// Draws parameters from the prior and responses from the likelihood on the
/// table's design; records the sample sd of each simulated response vector.
inline PriorPredictive prior_predictive(const data::ObservationTable& table, const ModelConfig& config, int n_sims,
                                        double lo = 0.3, double hi = 5.0) {
  rng::Philox g(config.seed, rng::Purpose::kPriorPredictive, 0);
  auto half_cauchy = [&](double scale) { return std::abs(scale * g.normal() / g.normal()); };
  auto effect = [&](double scale) {
    return config.normal_effects() ? scale * g.normal() : scale * g.student_t(config.effect_dof);
  };
  PriorPredictive out;
  std::vector<double> b_acc(table.n_accounts()), b_champ(table.n_champions()), y(table.rows.size());
  int in_range = 0;
  for (int s = 0; s < n_sims; ++s) {
    const double beta0 = g.normal(0.0, config.intercept_sd);
    const double slope = config.has_covariate ? g.normal(0.0, config.covariate_sd) : 0.0;
    const double tau = half_cauchy(config.effect_scale_prior);
    const double phi = half_cauchy(config.effect_scale_prior);
    const double sigma = half_cauchy(config.noise_scale_prior);
    for (auto& b : b_acc) b = effect(tau);
    for (auto& b : b_champ) b = effect(phi);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const auto& r = table.rows[i];
      y[i] = beta0 + slope * r.covariate + b_acc[r.account] + b_champ[r.champion] + g.normal(0.0, sigma);
    }
    const double sd = stats::sd(y);
    out.response_sd.push_back(sd);
    if (sd >= lo && sd <= hi) ++in_range;
  }
  out.fraction_in_range = static_cast<double>(in_range) / static_cast<double>(n_sims);
  return out;
}

}  // namespace sido::infer
