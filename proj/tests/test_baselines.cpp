#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/Dense>

#include "sido/baselines.hpp"
#include "test_util.hpp"

using namespace sido;

namespace {

const CellKey kGold{Role::MID, Server::NA, Phase::P0_7, Stat::GOLD};

// `n_games` games over a pool of `n_players`; every game draws 10 distinct
// players and random 7' gold.
std::vector<data::GameRecord> random_games(int n_games, int n_players, std::uint64_t seed) {
  rng::Philox g(seed, rng::Purpose::kTest, 50);
  std::vector<data::GameRecord> out;
  for (int k = 0; k < n_games; ++k) {
    auto game = sido::testing::make_game("g" + std::to_string(k));
    std::vector<int> pool(static_cast<std::size_t>(n_players));
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < 10; ++i) {
      std::swap(pool[i], pool[i + g.below(pool.size() - i)]);
      auto& p = game.players[i];
      p.account_id = synth::padded_id("u", static_cast<std::size_t>(pool[i]), static_cast<std::size_t>(n_players));
      p.at7.gold = 800 + 400 * g.uniform();
    }
    out.push_back(game);
  }
  return out;
}

Eigen::MatrixXd dense(const baselines::PmDesign& d) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.rows.size()),
                                            static_cast<Eigen::Index>(d.n_cols()));
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    for (auto c : d.rows[i].plus) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) += 1.0;
    for (auto c : d.rows[i].minus) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) -= 1.0;
  }
  return X;
}

Eigen::VectorXd responses(const baselines::PmDesign& d) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(d.rows.size()));
  for (std::size_t i = 0; i < d.rows.size(); ++i) y(static_cast<Eigen::Index>(i)) = d.rows[i].response;
  return y;
}

double norm(const std::vector<double>& w) {
  double s = 0.0;
  for (double v : w) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST(BasicAverage, MeanExample) {
  const auto t = sido::testing::table_of(2, 1, {{0, 0, 0.5}, {0, 0, 1.5}, {1, 0, -1.0}});
  const auto s = baselines::ba_scores(t, 1);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s[0].mean, 1.0);
  EXPECT_EQ(s[0].n_games, 2u);
  EXPECT_GT(s[0].se, 0.0);
  EXPECT_FALSE(s[0].degenerate);
  EXPECT_EQ(s[1].se, 0.0);
  EXPECT_TRUE(s[1].degenerate);
  EXPECT_EQ(s[0].key.scope, Scope::BA);
}

TEST(BasicAverage, BootstrapIsBitExactPerSeed) {
  const auto c = sido::testing::make_synth([] {
    synth::SynthConfig s;
    s.n_accounts = 20;
    s.n_champions = 4;
    s.games_per_account = 15;
    s.seed = 2;
    return s;
  }());
  const auto a = baselines::ba_scores(c.table, 77, 200);
  const auto b = baselines::ba_scores(c.table, 77, 200);
  const auto other = baselines::ba_scores(c.table, 78, 200);
  ASSERT_EQ(a.size(), b.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].se, b[i].se);
    EXPECT_EQ(a[i].positive_fraction, b[i].positive_fraction);
    EXPECT_GE(a[i].se, 0.0);
    EXPECT_GE(a[i].n_games, 1u);
    any_diff |= a[i].se != other[i].se;
  }
  EXPECT_TRUE(any_diff);
}

TEST(BasicAverage, MeanIgnoresGameOrder) {
  std::vector<std::array<double, 3>> rows;
  rng::Philox g(3, rng::Purpose::kTest, 51);
  for (int i = 0; i < 40; ++i) rows.push_back({static_cast<double>(i % 4), 0, g.normal()});
  const auto a = baselines::ba_scores(sido::testing::table_of(4, 1, rows), 1);
  for (int rep = 0; rep < 5; ++rep) {
    std::shuffle(rows.begin(), rows.end(), g);
    const auto b = baselines::ba_scores(sido::testing::table_of(4, 1, rows), 1);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i].mean, b[i].mean, 1e-14);
  }
}

TEST(BasicAverage, RecordsCarrySeAndFraction) {
  const auto t = sido::testing::table_of(1, 1, {{0, 0, 0.5}, {0, 0, 1.5}});
  const auto s = baselines::ba_scores(t, 1);
  const auto r = baselines::ba_score_records(s);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].score, 1.0);
  EXPECT_EQ(r[0].sd, s[0].se);
  EXPECT_EQ(r[0].sign_prob, 1.0);
  EXPECT_EQ(r[0].n_games, 2u);
  EXPECT_THROW(baselines::ba_scores(t, 1, 1), ValidationError);
}

TEST(PlusMinusDesign, OneGameTwoRows) {
  auto g = sido::testing::make_game("g");
  sido::testing::player(g, Team::RED, Role::TOP).at7.gold = 2000;
  const std::vector<data::GameRecord> games{g};
  const auto d = baselines::pm_design(games, kGold);
  ASSERT_EQ(d.rows.size(), 2u);
  EXPECT_EQ(d.n_players(), 10u);
  for (const auto& r : d.rows) {
    EXPECT_EQ(r.plus.size(), 5u);
    EXPECT_EQ(r.minus.size(), 5u);
    for (auto c : r.plus) EXPECT_LT(c, d.n_players());
    for (auto c : r.minus) EXPECT_GE(c, d.n_players());
  }
  const auto X = dense(d);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    EXPECT_EQ(X.row(i).head(10).sum(), 5.0);
    EXPECT_EQ(X.row(i).tail(10).sum(), -5.0);
  }
}

TEST(PlusMinusDesign, AppearancesCountGames) {
  std::vector<data::GameRecord> games;
  for (int k = 0; k < 3; ++k) {
    auto g = sido::testing::make_game("g" + std::to_string(k), 30.0, "q" + std::to_string(k));
    g.players[0].account_id = "shared";
    g.players[0].at7.gold = 900 + 100 * k;
    games.push_back(g);
  }
  const auto d = baselines::pm_design(games, kGold);
  const auto X = dense(d);
  const auto idx = static_cast<Eigen::Index>(
      std::lower_bound(d.player_ids.begin(), d.player_ids.end(), "shared") - d.player_ids.begin());
  EXPECT_EQ(X.col(idx).cwiseAbs().sum(), 3.0);
  EXPECT_EQ(X.col(idx + static_cast<Eigen::Index>(d.n_players())).cwiseAbs().sum(), 3.0);
}

TEST(PlusMinusDesign, SkipsGamesWithoutThePhase) {
  std::vector<data::GameRecord> games{sido::testing::make_game("a", 30.0), sido::testing::make_game("b", 20.0),
                                      sido::testing::make_game("c", 28.0, "z")};
  games[2].players[3].at25->gold = 5000;
  CellKey key = kGold;
  key.phase = Phase::P15_25;
  EXPECT_EQ(baselines::pm_design(games, key).rows.size(), 4u);
  EXPECT_THROW(baselines::pm_design(std::vector<data::GameRecord>{}, kGold), DegenerateError);
}

TEST(PlusMinus, HugeLambdaShrinksToZero) {
  const auto d = baselines::pm_design(random_games(20, 30, 1), kGold);
  const auto fit = baselines::fit_plus_minus(d, 1e9);
  for (double w : fit.coefficients()) EXPECT_LT(std::abs(w), 1e-6);
}

TEST(PlusMinus, SingleGameTeammatesShareCoefficients) {
  auto g = sido::testing::make_game("g");
  for (auto& p : g.players) {
    if (p.team == Team::RED) p.at7.gold = 1400;
  }
  const auto d = baselines::pm_design(std::vector<data::GameRecord>{g}, kGold);
  const auto fit = baselines::fit_plus_minus(d, 0.5);
  std::map<Team, std::vector<double>> off;
  for (const auto& p : g.players) {
    const auto i = static_cast<std::size_t>(
        std::lower_bound(d.player_ids.begin(), d.player_ids.end(), p.account_id) - d.player_ids.begin());
    off[p.team].push_back(fit.offense[i]);
  }
  for (const auto& [t, v] : off) {
    for (double x : v) EXPECT_NEAR(x, v[0], 1e-12);
  }
  EXPECT_LT(off[Team::BLUE][0], 0.0);
  EXPECT_GT(off[Team::RED][0], 0.0);
}

TEST(PlusMinus, MatchesDenseSolve) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto d = baselines::pm_design(random_games(20, 30, seed), kGold);
    const double lambda = baselines::default_lambda(d);
    const auto fit = baselines::fit_plus_minus(d, lambda);
    const auto X = dense(d);
    const Eigen::MatrixXd A = X.transpose() * X + lambda * Eigen::MatrixXd::Identity(X.cols(), X.cols());
    const Eigen::VectorXd w = A.ldlt().solve(X.transpose() * responses(d));
    const auto got = fit.coefficients();
    ASSERT_EQ(static_cast<Eigen::Index>(got.size()), w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) EXPECT_NEAR(got[static_cast<std::size_t>(i)], w(i), 1e-6);
    EXPECT_LT(fit.relative_residual, 1e-8);
  }
}

TEST(PlusMinus, NegatedResponsesNegateCoefficients) {
  const auto d = baselines::pm_design(random_games(25, 30, 9), kGold);
  std::vector<double> y, neg;
  for (const auto& r : d.rows) {
    y.push_back(r.response);
    neg.push_back(-r.response);
  }
  const auto a = baselines::solve_plus_minus(d, y, 2.0).coefficients();
  const auto b = baselines::solve_plus_minus(d, neg, 2.0).coefficients();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], -b[i], 1e-9);
}

TEST(PlusMinus, RidgeNormShrinksWithLambda) {
  for (std::uint64_t seed = 11; seed < 16; ++seed) {
    const auto d = baselines::pm_design(random_games(30, 40, seed), kGold);
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {0.01, 0.1, 1.0, 10.0, 100.0}) {
      const double n = norm(baselines::fit_plus_minus(d, lambda).coefficients());
      EXPECT_LE(n, prev * (1 + 1e-9));
      prev = n;
    }
  }
}

TEST(PlusMinus, Errors) {
  const auto d = baselines::pm_design(random_games(20, 30, 2), kGold);
  EXPECT_THROW(baselines::fit_plus_minus(d, 0.0), ValidationError);
  EXPECT_THROW(baselines::fit_plus_minus(d, -1.0), ValidationError);
  std::vector<double> y(d.rows.size(), 0.0);
  y[0] = 1.0;
  EXPECT_THROW(baselines::solve_plus_minus(d, y, 1e-3, 1e-14, 1), ConvergenceError);
  EXPECT_THROW(baselines::solve_plus_minus(d, std::vector<double>{1.0}, 1.0), ValidationError);
}

TEST(PlusMinus, BootstrapReproducibleAndMapped) {
  const auto d = baselines::pm_design(random_games(30, 30, 4), kGold);
  const auto fit = baselines::fit_plus_minus(d, baselines::default_lambda(d));
  const auto a = baselines::pm_bootstrap(d, fit, 5, 20);
  const auto b = baselines::pm_bootstrap(d, fit, 5, 20);
  EXPECT_EQ(a.offense_sd, b.offense_sd);
  EXPECT_EQ(a.defense_positive, b.defense_positive);
  for (double s : a.offense_sd) EXPECT_GT(s, 0.0);
  const auto recs = baselines::pm_score_records(fit, &a, Role::JGL, {d.player_ids[0]});
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].key.scope, Scope::PM_OFF);
  EXPECT_EQ(recs[1].key.scope, Scope::PM_DEF);
  EXPECT_EQ(recs[0].key.role, Role::JGL);
  EXPECT_EQ(recs[0].score, fit.offense[0]);
  EXPECT_EQ(recs[1].sd, a.defense_sd[0]);
  EXPECT_EQ(baselines::pm_score_records(fit, nullptr, Role::TOP).size(), 2 * d.n_players());
}
