#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "sido/analysis.hpp"
#include "test_util.hpp"

using namespace sido;

namespace {

// Adjusted p_i = min over p_j >= p_i of p_j * m / #{k : p_k <= p_j}, capped at 1.
std::vector<double> bh_oracle(const std::vector<double>& p) {
  const double m = static_cast<double>(p.size());
  std::vector<double> out(p.size(), 1.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (double pj : p) {
      if (pj < p[i]) continue;
      const double rank = static_cast<double>(std::count_if(p.begin(), p.end(), [&](double v) { return v <= pj; }));
      out[i] = std::min(out[i], pj * m / rank);
    }
  }
  return out;
}

std::vector<ScoreRecord> cell_scores(const std::vector<double>& pro, const std::vector<double>& non,
                                     Scope scope = Scope::ENEMY, Stat stat = Stat::GOLD) {
  std::vector<ScoreRecord> out;
  const CellKey key{Role::MID, Server::NA, Phase::P0_7, stat, scope};
  for (std::size_t i = 0; i < pro.size(); ++i) out.push_back({"pro" + std::to_string(i), key, pro[i], 0.1, 0.5, 1});
  for (std::size_t i = 0; i < non.size(); ++i) out.push_back({"non" + std::to_string(i), key, non[i], 0.1, 0.5, 1});
  return out;
}

std::set<std::string> pro_ids(std::size_t n) {
  std::set<std::string> s;
  for (std::size_t i = 0; i < n; ++i) s.insert("pro" + std::to_string(i));
  return s;
}

std::vector<double> draws(std::size_t n, double mean, std::uint64_t stream) {
  rng::Philox g(23, rng::Purpose::kTest, stream);
  std::vector<double> v(n);
  for (auto& x : v) x = mean + g.normal();
  return v;
}

}  // namespace

TEST(StudentT, ClosedFormTwoDof) {
  for (double t : {-2.0, 0.0, 0.5, 1.0, 3.0}) {
    EXPECT_NEAR(stats::student_t_upper(t, 2.0), 0.5 - t / (2.0 * std::sqrt(t * t + 2.0)), 1e-12);
  }
}

TEST(Welch, IdenticalGroupsGiveHalf) {
  const std::vector<double> a{1, 2, 3, 4, 5};
  const auto r = analysis::welch_one_sided(a, a);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_NEAR(r.p, 0.5, 1e-12);
}

TEST(Welch, ShiftOfThreeIsSignificant) {
  const auto non = draws(30, 0.0, 1);
  std::vector<double> pro;
  for (double v : non) pro.push_back(v + 3.0);
  const auto r = analysis::welch_one_sided(pro, non);
  EXPECT_LT(r.p, 1e-6);
  // Equal variances and sizes: df = 2(n-1).
  EXPECT_NEAR(r.df, 58.0, 1e-9);
  EXPECT_NEAR(r.t, 3.0 / std::sqrt(2.0 * stats::variance(non) / 30.0), 1e-9);
}

TEST(Welch, SwappedGroupsComplement) {
  const auto a = draws(12, 0.3, 2);
  const auto b = draws(40, 0.0, 3);
  const auto ab = analysis::welch_one_sided(a, b);
  const auto ba = analysis::welch_one_sided(b, a);
  EXPECT_NEAR(ab.p + ba.p, 1.0, 1e-12);
  EXPECT_NEAR(ab.df, ba.df, 1e-12);
}

TEST(Welch, SatterthwaiteDof) {
  const std::vector<double> a{0, 1, 2, 3};        // var 5/3
  const std::vector<double> b{0, 2, 4, 6, 8, 10};  // var 14
  const double va = (5.0 / 3.0) / 4, vb = 14.0 / 6;
  const double df = (va + vb) * (va + vb) / (va * va / 3 + vb * vb / 5);
  EXPECT_NEAR(analysis::welch_one_sided(a, b).df, df, 1e-12);
}

TEST(Welch, DegenerateInputsAreErrors) {
  EXPECT_THROW(analysis::welch_one_sided(std::vector<double>{1}, std::vector<double>{1, 2}), DegenerateError);
  EXPECT_THROW(analysis::welch_one_sided(std::vector<double>{1, 1}, std::vector<double>{1, 2}), DegenerateError);
}

TEST(FdrAdjust, StepUpExample) {
  const auto adj = analysis::fdr_adjust(std::vector<double>{0.01, 0.02, 0.03, 0.5});
  EXPECT_EQ(adj, (std::vector<double>{0.04, 0.04, 0.04, 0.5}));
  EXPECT_EQ(analysis::fdr_adjust(std::vector<double>{0.5, 0.03, 0.01, 0.02}),
            (std::vector<double>{0.5, 0.04, 0.04, 0.04}));
}

TEST(FdrAdjust, TrivialCases) {
  EXPECT_EQ(analysis::fdr_adjust(std::vector<double>{0.2}), std::vector<double>{0.2});
  EXPECT_EQ(analysis::fdr_adjust(std::vector<double>(5, 0.3)), std::vector<double>(5, 0.3));
  EXPECT_TRUE(analysis::fdr_adjust(std::vector<double>{}).empty());
  EXPECT_THROW(analysis::fdr_adjust(std::vector<double>{0.1, 1.5}), ValidationError);
}

TEST(FdrAdjust, RandomVectorsMatchOracle) {
  rng::Philox g(8, rng::Purpose::kTest, 30);
  for (int rep = 0; rep < 300; ++rep) {
    std::vector<double> p(1 + g.below(25));
    for (auto& v : p) v = g.below(4) == 0 ? std::round(g.uniform() * 10) / 10 : g.uniform();  // some ties
    const auto adj = analysis::fdr_adjust(p);
    const auto oracle = bh_oracle(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_GE(adj[i], p[i]);
      EXPECT_LE(adj[i], 1.0);
      EXPECT_NEAR(adj[i], oracle[i], 1e-15);
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[i] <= p[j]) {
          EXPECT_LE(adj[i], adj[j]);
        }
      }
    }
  }
}

TEST(CompareGroups, EqualMeansGiveZeroDifference) {
  const auto s = cell_scores({-1, 1, 0}, {-2, 2, 0, -1, 1});
  const auto c = analysis::compare_groups(s, pro_ids(3));
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].normalized_difference, 0.0);
  EXPECT_EQ(c[0].n_pro, 3u);
  EXPECT_EQ(c[0].n_nonpro, 5u);
  EXPECT_EQ(c[0].method, "SIDO");
  EXPECT_NEAR(c[0].p_adjusted, 0.5, 1e-12);
}

TEST(CompareGroups, NormalizedBySdOfNonPros) {
  const std::vector<double> non{0, 2, 4, 6};                // sd sqrt(20/3)
  const auto c = analysis::compare_groups(cell_scores({5, 7}, non), pro_ids(2));
  EXPECT_NEAR(c[0].normalized_difference, (6.0 - 3.0) / std::sqrt(20.0 / 3.0), 1e-12);
}

TEST(CompareGroups, TranslationInvariant) {
  const auto pro = draws(10, 0.4, 4);
  const auto non = draws(60, 0.0, 5);
  const auto base = analysis::compare_groups(cell_scores(pro, non), pro_ids(10));
  std::vector<double> pro2, non2;
  for (double v : pro) pro2.push_back(v + 12.5);
  for (double v : non) non2.push_back(v + 12.5);
  const auto moved = analysis::compare_groups(cell_scores(pro2, non2), pro_ids(10));
  EXPECT_NEAR(base[0].normalized_difference, moved[0].normalized_difference, 1e-9);
  EXPECT_NEAR(base[0].p_raw, moved[0].p_raw, 1e-9);
}

TEST(CompareGroups, FewProsSkipped) {
  const auto c = analysis::compare_groups(cell_scores({1.0}, {0, 1, 2}), pro_ids(1));
  ASSERT_EQ(c.size(), 1u);
  EXPECT_TRUE(c[0].skipped);
  EXPECT_EQ(c[0].skip_reason, "FEW_PROS");
  EXPECT_TRUE(std::isnan(c[0].p_adjusted));
}

TEST(CompareGroups, FdrWithinMethodAndScopeFilter) {
  auto s = cell_scores(draws(8, 1.0, 6), draws(50, 0.0, 7), Scope::ENEMY, Stat::GOLD);
  auto more = cell_scores(draws(8, 0.0, 8), draws(50, 0.0, 9), Scope::ALLY_PLUS_PLAYER, Stat::DMG);
  auto ba = cell_scores(draws(8, 0.0, 10), draws(50, 0.0, 11), Scope::BA, Stat::GOLD);
  auto player = cell_scores(draws(8, 0.0, 12), draws(50, 0.0, 13), Scope::PLAYER, Stat::GOLD);
  s.insert(s.end(), more.begin(), more.end());
  s.insert(s.end(), ba.begin(), ba.end());
  s.insert(s.end(), player.begin(), player.end());
  const auto c = analysis::compare_groups(s, pro_ids(8));
  ASSERT_EQ(c.size(), 3u);  // PLAYER is not compared by default
  std::vector<double> sido_raw;
  for (const auto& x : c) {
    if (x.method == "SIDO") sido_raw.push_back(x.p_raw);
    if (x.method == "BA") {
      EXPECT_EQ(x.p_adjusted, x.p_raw);
    }
  }
  const auto adj = analysis::fdr_adjust(sido_raw);
  std::size_t k = 0;
  for (const auto& x : c) {
    if (x.method == "SIDO") {
      EXPECT_EQ(x.p_adjusted, adj[k++]);
    }
  }
}

TEST(AggregateByPlayer, AveragesAccountsOfOnePlayer) {
  const CellKey key{Role::MID, Server::NA, Phase::P0_7, Stat::GOLD, Scope::BA};
  std::vector<ScoreRecord> s{{"acc1", key, 1.0, 0.1, 0.5, 1}, {"acc2", key, 3.0, 0.1, 0.5, 1},
                             {"acc3", key, 9.0, 0.1, 0.5, 1}};
  const std::map<std::string, data::RosterEntry> roster{{"acc1", {"Faker", League::LCK}},
                                                        {"acc2", {"Faker", League::LCK}}};
  const auto out = analysis::aggregate_by_player(s, roster);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].account_id, "Faker");
  EXPECT_EQ(out[0].score, 2.0);
}

TEST(Rmse, ExactAndUnitError) {
  const auto holdout = sido::testing::table_of(2, 1, {{0, 0, 1.0}, {0, 0, 2.0}, {1, 0, -1.0}});
  const auto none = analysis::rmse_with(holdout, [](const std::string&, const std::string&, double, bool&)
                                            -> std::optional<double> { return std::nullopt; });
  EXPECT_EQ(none.excluded_unseen_champion, 3u);
  EXPECT_TRUE(none.per_account.empty());
  // Unit error, alternating sign.
  std::size_t row = 0;
  const auto unit = analysis::rmse_with(holdout, [&](const std::string&, const std::string&, double, bool&)
                                            -> std::optional<double> {
    const double y = holdout.rows[row++].response;
    return row % 2 ? y - 1.0 : y + 1.0;
  });
  ASSERT_EQ(unit.per_account.size(), 2u);
  for (const auto& [id, r] : unit.per_account) EXPECT_NEAR(r, 1.0, 1e-15);
  EXPECT_NEAR(unit.mean_rmse(), 1.0, 1e-15);
  row = 0;
  const auto zero = analysis::rmse_with(holdout, [&](const std::string&, const std::string&, double, bool&)
                                            -> std::optional<double> { return holdout.rows[row++].response; });
  EXPECT_EQ(zero.mean_rmse(), 0.0);
  EXPECT_EQ(zero.rows_used, 3u);
}

TEST(Rmse, BaPredictsAccountMean) {
  const auto train = sido::testing::table_of(2, 1, {{0, 0, 1.0}, {0, 0, 3.0}, {1, 0, 0.0}, {1, 0, 0.0}});
  auto holdout = sido::testing::table_of(3, 1, {{0, 0, 2.0}, {1, 0, 1.0}, {2, 0, 5.0}});
  holdout.account_ids = {train.account_ids[0], train.account_ids[1], "fresh"};
  const auto ba = baselines::ba_scores(train, 1);
  const auto rep = analysis::rmse_by_account(ba, holdout);
  ASSERT_EQ(rep.per_account.size(), 2u);
  EXPECT_EQ(rep.per_account[0].second, 0.0);
  EXPECT_EQ(rep.per_account[1].second, 1.0);
  EXPECT_EQ(rep.excluded_unseen_account, 1u);
}

TEST(Rmse, EmptyHoldoutIsAnError) {
  data::ObservationTable empty;
  EXPECT_THROW(analysis::rmse_with(empty, [](const std::string&, const std::string&, double, bool&)
                                       -> std::optional<double> { return 0.0; }),
               DegenerateError);
}

TEST(Differentials, FractionPositive) {
  EXPECT_DOUBLE_EQ(analysis::fraction_positive(std::vector<double>{10, -2, 5}), 2.0 / 3.0);
  EXPECT_EQ(analysis::fraction_positive(std::vector<double>{1, 2, 3}), 1.0);
  EXPECT_TRUE(std::isnan(analysis::fraction_positive(std::vector<double>{})));
}

TEST(Differentials, SummaryPerPhaseAndStat) {
  std::vector<data::GameRecord> games;
  for (int k = 0; k < 3; ++k) {
    auto g = sido::testing::make_game("g" + std::to_string(k), k == 2 ? 20.0 : 30.0);
    // Winner BLUE: +10 gold on one blue player, except game 1 where red gets +10.
    sido::testing::player(g, k == 1 ? Team::RED : Team::BLUE, Role::TOP).at7.gold += 10;
    games.push_back(g);
  }
  const auto d = analysis::differential_summary(games);
  ASSERT_EQ(d.size(), 6u);
  for (const auto& x : d) {
    if (x.stat == Stat::GOLD && x.phase == Phase::P0_7) {
      EXPECT_EQ(x.differentials, (std::vector<double>{10, -10, 10}));
      EXPECT_DOUBLE_EQ(x.fraction, 2.0 / 3.0);
    }
    if (x.phase == Phase::P15_25) {
      EXPECT_EQ(x.differentials.size(), 2u);
    }
  }
}
