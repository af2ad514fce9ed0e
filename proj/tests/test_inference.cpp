#include <gtest/gtest.h>

#include <fstream>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "sido/diagnostics.hpp"
#include "sido/fit_io.hpp"
#include "sido/inference.hpp"
#include "sido/rng.hpp"
#include "test_util.hpp"

using namespace sido;
using sido::testing::make_synth;

namespace {

synth::SynthConfig medium() {
  synth::SynthConfig c;
  c.n_accounts = 30;
  c.n_champions = 6;
  c.games_per_account = 20;
  c.tau = 0.3;
  c.phi = 0.3;
  c.sigma = 0.5;
  c.seed = 21;
  return c;
}

infer::ModelConfig quick(std::uint64_t seed = 3) {
  infer::ModelConfig m;
  m.warmup = 300;
  m.draws = 500;
  m.seed = seed;
  return m;
}

double mcse(const infer::PosteriorFit& fit, std::size_t p, const infer::Diagnostics& d) {
  return infer::summarize_draws(fit.pooled(p)).sd / std::sqrt(d.per_param[p].ess);
}

}  // namespace

// ---------------------------------------------------------------------------
// Random numbers

TEST(Philox, KnownAnswerForZeroKeyAndCounter) {
  rng::Philox g(0, 0);
  // Philox4x32-10 of counter 0, key 0 is (6627e8d5, e169c58d, bc57ac4c, 9b00dbd8).
  EXPECT_EQ(g(), 0xe169c58d6627e8d5ull);
  EXPECT_EQ(g(), 0x9b00dbd8bc57ac4cull);
}

TEST(Philox, StreamsAreIndependentAndReproducible) {
  rng::Philox a(7, rng::Purpose::kChain, 0), b(7, rng::Purpose::kChain, 0), c(7, rng::Purpose::kChain, 1);
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
  }
}

TEST(Philox, DistributionMoments) {
  rng::Philox g(99, rng::Purpose::kTest, 3);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0, sg = 0;
  for (int i = 0; i < n; ++i) {
    const double u = g.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = g.normal();
    sn += z;
    sn2 += z * z;
    sg += g.gamma(2.5);
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
  EXPECT_NEAR(sg / n, 2.5, 0.03);
  std::array<int, 7> counts{};
  for (int i = 0; i < 70000; ++i) ++counts[g.below(7)];
  for (int k : counts) EXPECT_NEAR(k, 10000, 400);
}

// ---------------------------------------------------------------------------
// Diagnostics

TEST(SplitRhat, IidChainsConverge) {
  std::vector<std::vector<double>> chains(4, std::vector<double>(1000));
  for (std::size_t c = 0; c < 4; ++c) {
    rng::Philox g(5, rng::Purpose::kTest, c);
    for (auto& v : chains[c]) v = g.normal();
  }
  std::vector<std::span<const double>> spans(chains.begin(), chains.end());
  const auto d = diag::split_rhat_ess(spans);
  EXPECT_LT(d.rhat, 1.01);
  EXPECT_GE(d.rhat, 0.99);
  EXPECT_LE(d.ess, 4000.0 * 1.1);
  EXPECT_GT(d.ess, 2500.0);
}

TEST(SplitRhat, ShiftedChainFlagged) {
  std::vector<std::vector<double>> chains(4, std::vector<double>(1000));
  for (std::size_t c = 0; c < 4; ++c) {
    rng::Philox g(6, rng::Purpose::kTest, c);
    for (auto& v : chains[c]) v = g.normal() + (c == 0 ? 5.0 : 0.0);
  }
  std::vector<std::span<const double>> spans(chains.begin(), chains.end());
  EXPECT_GT(diag::split_rhat_ess(spans).rhat, 1.5);
}

TEST(SplitRhat, ConstantChainsDegenerate) {
  std::vector<std::vector<double>> chains(3, std::vector<double>(50, 2.0));
  std::vector<std::span<const double>> spans(chains.begin(), chains.end());
  const auto d = diag::split_rhat_ess(spans);
  EXPECT_TRUE(d.degenerate);
  EXPECT_TRUE(std::isnan(d.rhat));
}

TEST(SplitRhat, AutocorrelatedChainHasLowEss) {
  std::vector<std::vector<double>> chains(4, std::vector<double>(2000));
  for (std::size_t c = 0; c < 4; ++c) {
    rng::Philox g(8, rng::Purpose::kTest, c);
    double x = 0.0;
    for (auto& v : chains[c]) v = x = 0.95 * x + g.normal();
  }
  std::vector<std::span<const double>> spans(chains.begin(), chains.end());
  const auto d = diag::split_rhat_ess(spans);
  // AR(1) with rho = 0.95: ESS ~ N (1 - rho) / (1 + rho) = 205.
  EXPECT_GT(d.ess, 100.0);
  EXPECT_LT(d.ess, 400.0);
}

// ---------------------------------------------------------------------------
// Summaries, predictions, sign probabilities

TEST(Summaries, ConstantDraws) {
  const std::vector<double> d(100, 1.25);
  const auto s = infer::summarize_draws(d);
  EXPECT_EQ(s.mean, 1.25);
  EXPECT_EQ(s.sd, 0.0);
}

TEST(SignProbability, Examples) {
  EXPECT_EQ(infer::sign_probability(std::vector<double>{0.1, 2.0, 3.0}), 1.0);
  std::vector<double> alt;
  for (int i = 0; i < 100; ++i) alt.push_back(i % 2 ? 0.4 : -0.4);
  EXPECT_EQ(infer::sign_probability(alt), 0.5);
  rng::Philox g(31, rng::Purpose::kTest, 0);
  std::vector<double> n(4000);
  for (auto& v : n) v = g.normal(0.3, 1.0);
  EXPECT_NEAR(infer::sign_probability(n), stats::normal_cdf(0.3), 0.03);
}

namespace {

infer::PosteriorFit hand_fit(std::size_t n_acc, std::size_t n_champ, double fill) {
  infer::PosteriorFit fit;
  for (std::size_t i = 0; i < n_acc; ++i) fit.account_ids.push_back("a" + std::to_string(i));
  for (std::size_t j = 0; j < n_champ; ++j) fit.champion_ids.push_back("c" + std::to_string(j));
  fit.param_names = infer::parameter_names(false, n_acc, n_champ);
  fit.n_chains = 2;
  fit.n_draws = 4;
  fit.draws.assign(fit.n_params() * 8, fill);
  return fit;
}

}  // namespace

TEST(Predict, ZeroMeansPredictZeroAndUnknownIndexNamed) {
  const auto fit = hand_fit(3, 2, 0.0);
  const std::vector<infer::PredictRow> rows{{0, 0, 0.0}, {2, 1, 0.0}};
  for (double v : infer::predict(fit, rows)) EXPECT_EQ(v, 0.0);
  try {
    const std::vector<infer::PredictRow> bad{{5, 0, 0.0}};
    infer::predict(fit, bad);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("5"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// The sampler

TEST(FitHierarchical, RejectsBadConfigAndEmptyIndex) {
  const auto s = make_synth(medium());
  auto m = quick();
  m.chains = 1;
  EXPECT_THROW(infer::fit_hierarchical(s.table, m), ValidationError);
  m = quick();
  m.draws = 50;
  EXPECT_THROW(infer::fit_hierarchical(s.table, m), ValidationError);
  auto t = s.table;
  t.account_ids.push_back("zz_unused");
  EXPECT_THROW(infer::fit_hierarchical(t, quick()), DegenerateError);
  m = quick();
  m.has_covariate = true;
  EXPECT_THROW(infer::fit_hierarchical(s.table, m), ValidationError);
}

TEST(FitHierarchical, SeedDeterminism) {
  const auto s = make_synth(medium());
  const auto a = infer::fit_hierarchical(s.table, quick(4));
  const auto b = infer::fit_hierarchical(s.table, quick(4));
  EXPECT_EQ(a.draws, b.draws);
  const auto c = infer::fit_hierarchical(s.table, quick(5));
  EXPECT_NE(a.draws, c.draws);
}

TEST(FitHierarchical, ScalesStrictlyPositiveAndDimensionsConsistent) {
  const auto s = make_synth(medium());
  const auto fit = infer::fit_hierarchical(s.table, quick());
  EXPECT_EQ(fit.n_params(), 4 + s.table.n_accounts() + s.table.n_champions());
  EXPECT_EQ(fit.draws.size(), fit.n_params() * 4 * 500);
  for (std::size_t p : {fit.tau_param(), fit.phi_param(), fit.sigma_param()}) {
    for (double v : fit.pooled(p)) ASSERT_GT(v, 0.0);
  }
  EXPECT_EQ(fit.param_names[fit.account_param(0)], "b_p[0]");
  EXPECT_EQ(fit.param_names[fit.champion_param(0)], "b_c[0]");
}

TEST(FitHierarchical, DiagnosticsWithinBounds) {
  const auto s = make_synth(medium());
  const auto fit = infer::fit_hierarchical(s.table, quick());
  const auto d = infer::diagnostics(fit);
  for (const auto& p : d.per_param) {
    EXPECT_GT(p.rhat, 0.99);
    EXPECT_LE(p.ess, 2000.0 * 1.2);
  }
  EXPECT_TRUE(d.converged);
  EXPECT_TRUE(fit.warnings.empty());
}

TEST(FitHierarchical, UnmetGateAttachesWarning) {
  const auto s = make_synth(medium());
  infer::ConvergenceGate impossible{1.0, 1e9};
  const auto fit = infer::fit_hierarchical(s.table, quick(), impossible);
  ASSERT_EQ(fit.warnings.size(), 1u);
  EXPECT_NE(fit.warnings[0].find("convergence gate"), std::string::npos);
}

TEST(FitHierarchical, AllZeroResponsesGiveZeroEffects) {
  std::vector<std::array<double, 3>> rows;
  for (int i = 0; i < 1000; ++i) rows.push_back({static_cast<double>(i % 50), static_cast<double>(i % 7), 0.0});
  const auto t = sido::testing::table_of(50, 7, rows);
  const auto fit = infer::fit_hierarchical(t, quick());
  const auto means = infer::posterior_means(fit);
  EXPECT_LT(std::abs(means[fit.intercept_param()]), 0.05);
  for (std::size_t a = 0; a < fit.n_accounts(); ++a) EXPECT_LT(std::abs(means[fit.account_param(a)]), 0.05);
}

TEST(FitHierarchical, CovariateSlopeOnlyWhenRequested) {
  auto c = medium();
  c.beta_dmgt = 0.5;
  const auto s = make_synth(c);
  auto m = quick();
  m.has_covariate = true;
  const auto fit = infer::fit_hierarchical(s.table, m);
  ASSERT_TRUE(fit.covariate_param().has_value());
  EXPECT_EQ(fit.param_names[1], "beta_dmgt");
  EXPECT_NEAR(infer::summarize_draws(fit.pooled(1)).mean, 0.5, 0.05);
  const auto gold = infer::fit_hierarchical(make_synth(medium()).table, quick());
  EXPECT_FALSE(gold.param_index("beta_dmgt").has_value());
}

// With Normal effects and every scale pinned the joint posterior of
// (beta0, b_p, b_c) is Gaussian; compare against the dense solve.
TEST(FitHierarchical, MatchesDenseGaussianPosterior) {
  const auto s = make_synth(medium());
  auto m = quick(17);
  m.effect_dof = std::numeric_limits<double>::infinity();
  m.fixed_tau = 0.3;
  m.fixed_phi = 0.3;
  m.fixed_sigma = 0.5;
  m.draws = 1000;
  const auto fit = infer::fit_hierarchical(s.table, m);
  const auto P = static_cast<Eigen::Index>(s.table.n_accounts());
  const auto C = static_cast<Eigen::Index>(s.table.n_champions());
  const Eigen::Index K = 1 + P + C;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(K, K);
  Eigen::VectorXd lin = Eigen::VectorXd::Zero(K);
  for (const auto& r : s.table.rows) {
    const std::array<Eigen::Index, 3> cols{0, 1 + static_cast<Eigen::Index>(r.account),
                                           1 + P + static_cast<Eigen::Index>(r.champion)};
    for (auto i : cols) {
      lin(i) += r.response / 0.25;
      for (auto j : cols) Q(i, j) += 1.0 / 0.25;
    }
  }
  Q(0, 0) += 1.0;
  for (Eigen::Index i = 1; i <= P; ++i) Q(i, i) += 1.0 / 0.09;
  for (Eigen::Index i = 1 + P; i < K; ++i) Q(i, i) += 1.0 / 0.09;
  const Eigen::VectorXd mean = Q.ldlt().solve(lin);
  const Eigen::MatrixXd cov = Q.inverse();
  const auto d = infer::diagnostics(fit);
  auto check = [&](std::size_t p, Eigen::Index k) {
    const auto sum = infer::summarize_draws(fit.pooled(p));
    EXPECT_NEAR(sum.mean, mean(k), 4.0 * mcse(fit, p, d)) << fit.param_names[p];
    EXPECT_NEAR(sum.sd, std::sqrt(cov(k, k)), 0.1 * std::sqrt(cov(k, k))) << fit.param_names[p];
  };
  check(fit.intercept_param(), 0);
  for (Eigen::Index a = 0; a < P; ++a) check(fit.account_param(static_cast<std::size_t>(a)), 1 + a);
  for (Eigen::Index c = 0; c < C; ++c) check(fit.champion_param(static_cast<std::size_t>(c)), 1 + P + c);
}

// Posterior mean of b_p lies between 0 and the account's least-squares
// effect with the other terms held at their posterior means.
TEST(FitHierarchical, ShrinkageNeverOvershoots) {
  const auto s = make_synth(medium());
  auto m = quick(8);
  m.draws = 1000;
  const auto fit = infer::fit_hierarchical(s.table, m);
  const auto means = infer::posterior_means(fit);
  const auto d = infer::diagnostics(fit);
  std::vector<double> sum(fit.n_accounts(), 0.0), n(fit.n_accounts(), 0.0);
  for (const auto& r : s.table.rows) {
    sum[r.account] += r.response - means[fit.intercept_param()] - means[fit.champion_param(r.champion)];
    n[r.account] += 1.0;
  }
  for (std::size_t a = 0; a < fit.n_accounts(); ++a) {
    const double ols = sum[a] / n[a];
    const double post = means[fit.account_param(a)];
    const double tol = 3.0 * mcse(fit, fit.account_param(a), d);
    EXPECT_LE(std::abs(post), std::abs(ols) + tol) << a;
    if (std::abs(ols) > tol) {
      EXPECT_GE(post * ols, -tol * std::abs(ols)) << a;
    }
  }
}

TEST(RelativeSummary, RatioToTau) {
  const auto s = make_synth(medium());
  const auto fit = infer::fit_hierarchical(s.table, quick());
  const auto rel = infer::relative_account_summary(fit);
  ASSERT_EQ(rel.size(), fit.n_accounts());
  const auto b = fit.pooled(fit.account_param(0));
  const auto tau = fit.pooled(fit.tau_param());
  double m = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) m += b[i] / tau[i];
  EXPECT_NEAR(rel[0].mean, m / static_cast<double>(b.size()), 1e-12);
}

// ---------------------------------------------------------------------------
// Prior predictive

namespace {

data::ObservationTable prior_table() {
  synth::SynthConfig c = medium();
  c.n_accounts = 100;
  c.n_champions = 20;
  return make_synth(c).table;
}

}  // namespace

// The documented property: under the default priors, at least 90% of prior
// draws give a response sd in [0.3, 5].
TEST(PriorPredictive, DefaultPriorsKeepResponseSdInRange) {
  infer::ModelConfig m;
  m.seed = 12;
  const auto pp = infer::prior_predictive(prior_table(), m, 1000);
  EXPECT_GE(pp.fraction_in_range, 0.9);
}

// Independent re-simulation of the same generative process with <random>;
// the library's fraction must agree within Monte Carlo error.
TEST(PriorPredictive, AgreesWithIndependentSimulation) {
  infer::ModelConfig m;
  m.seed = 12;
  const auto table = prior_table();
  const auto pp = infer::prior_predictive(table, m, 1000);
  std::mt19937_64 gen(2718);
  std::normal_distribution<double> z(0.0, 1.0);
  std::cauchy_distribution<double> cauchy(0.0, 1.0);
  std::student_t_distribution<double> t3(3.0);
  const int n = 2000;
  int in = 0;
  std::vector<double> acc(table.n_accounts()), ch(table.n_champions()), y(table.rows.size());
  for (int s = 0; s < n; ++s) {
    const double beta0 = z(gen);
    const double tau = 0.5 * std::abs(cauchy(gen));
    const double phi = 0.5 * std::abs(cauchy(gen));
    const double sigma = 0.3 * std::abs(cauchy(gen));
    for (auto& b : acc) b = tau * t3(gen);
    for (auto& b : ch) b = phi * t3(gen);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = beta0 + acc[table.rows[i].account] + ch[table.rows[i].champion] + sigma * z(gen);
    }
    const double sd = stats::sd(y);
    in += sd >= 0.3 && sd <= 5.0;
  }
  const double oracle = static_cast<double>(in) / n;
  // Binomial sd at p ~ 0.75 is 0.014 (n = 1000) and 0.010 (n = 2000).
  EXPECT_NEAR(pp.fraction_in_range, oracle, 0.06);
  EXPECT_GT(pp.fraction_in_range, 0.6);
}

// ---------------------------------------------------------------------------
// Fit files

TEST(FitIo, RoundTripIsByteIdentical) {
  const auto s = make_synth(medium());
  auto fit = infer::fit_hierarchical(s.table, quick());
  fit.identity = CellKey{Role::MID, Server::KR, Phase::P7_15, Stat::GOLD, Scope::ALLY};
  std::stringstream ss;
  infer::write_fit(ss, fit);
  const auto back = infer::read_fit(ss);
  EXPECT_EQ(back.draws, fit.draws);
  EXPECT_EQ(back.param_names, fit.param_names);
  EXPECT_EQ(back.account_ids, fit.account_ids);
  EXPECT_EQ(back.identity, fit.identity);
  EXPECT_EQ(back.config.seed, fit.config.seed);
  std::stringstream again;
  infer::write_fit(again, back);
  EXPECT_EQ(again.str(), [&] {
    std::stringstream x;
    infer::write_fit(x, fit);
    return x.str();
  }());
}

TEST(FitIo, TruncatedOrCorruptFileIsAnError) {
  const auto s = make_synth(medium());
  const auto fit = infer::fit_hierarchical(s.table, quick());
  std::stringstream ss;
  infer::write_fit(ss, fit);
  const auto bytes = ss.str();
  std::istringstream truncated(bytes.substr(0, bytes.size() - 100));
  EXPECT_THROW(infer::read_fit(truncated), IoError);
  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream wrong_magic(bad);
  EXPECT_THROW(infer::read_fit(wrong_magic), IoError);
  EXPECT_EQ(bytes.substr(0, 8), "SIDOFIT1");
}

TEST(FitIo, TwoCellsInOneDirectory) {
  const auto dir = sido::testing::temp_dir("fitio");
  const auto s = make_synth(medium());
  auto a = infer::fit_hierarchical(s.table, quick(1));
  a.identity = CellKey{Role::TOP, Server::NA, Phase::P0_7, Stat::GOLD, Scope::PLAYER};
  auto b = infer::fit_hierarchical(s.table, quick(2));
  b.identity = CellKey{Role::TOP, Server::NA, Phase::P0_7, Stat::GOLD, Scope::ENEMY};
  infer::save_fit_to_dir(a, dir);
  infer::save_fit_to_dir(b, dir);
  EXPECT_EQ(infer::load_fit_from_dir(dir, a.identity).draws, a.draws);
  EXPECT_EQ(infer::load_fit_from_dir(dir, b.identity).draws, b.draws);
  EXPECT_THROW(infer::load_fit(dir / "missing.sidofit"), IoError);
}
