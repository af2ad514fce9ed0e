#include <gtest/gtest.h>

#include <cmath>

#include "sido/metametrics.hpp"
#include "sido/rng.hpp"

using namespace sido;

namespace {

// Counts concordant, discordant and tied ordered pairs separately.
double pair_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  long concordant = 0, discordant = 0, tied = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (i == j) continue;
      if (a[i] == a[j] || b[i] == b[j]) {
        ++tied;
      } else if ((a[i] < a[j]) == (b[i] < b[j])) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  return (static_cast<double>(concordant) + 0.5 * static_cast<double>(tied)) /
         static_cast<double>(concordant + discordant + tied);
}

meta::MetricColumn column(const std::string& name, const std::vector<double>& v) {
  meta::MetricColumn c;
  c.name = name;
  for (std::size_t i = 0; i < v.size(); ++i) c.account_ids.push_back("a" + std::to_string(100000 + i));
  c.scores = v;
  return c;
}

std::vector<double> gaussian(std::size_t n, std::uint64_t stream) {
  rng::Philox g(17, rng::Purpose::kTest, stream);
  std::vector<double> v(n);
  for (auto& x : v) x = g.normal();
  return v;
}

}  // namespace

TEST(Discrimination, Examples) {
  const std::vector<double> s{-1.0, 0.0, 1.0};  // variance 1
  EXPECT_EQ(meta::discrimination(s, std::vector<double>{0, 0, 0}).value, 1.0);
  EXPECT_DOUBLE_EQ(meta::discrimination(s, std::vector<double>{0.25, 0.25, 0.25}).value, 0.75);
  EXPECT_EQ(meta::discrimination(s, std::vector<double>{2, 2, 2}).value, 0.0);
  const auto flat = meta::discrimination(std::vector<double>{1, 1, 1}, std::vector<double>{0.1, 0.1, 0.1});
  EXPECT_TRUE(flat.degenerate);
  EXPECT_EQ(flat.value, 0.0);
  EXPECT_THROW(meta::discrimination(s, std::vector<double>{0, -1, 0}), ValidationError);
  EXPECT_THROW(meta::discrimination(std::vector<double>{1, 2}, std::vector<double>{0, 0}), DegenerateError);
  meta::MetricColumn no_var = column("x", s);
  EXPECT_THROW(meta::discrimination(no_var), DegenerateError);
}

TEST(Discrimination, AffineInvariant) {
  const auto s = gaussian(50, 1);
  std::vector<double> var(50);
  rng::Philox g(1, rng::Purpose::kTest, 2);
  for (auto& v : var) v = 0.3 * g.uniform();
  const double d = meta::discrimination(s, var).value;
  for (double c : {0.1, 3.0, -2.0}) {
    std::vector<double> s2, v2;
    for (double x : s) s2.push_back(c * x + 7.0);
    for (double x : var) v2.push_back(c * c * x);
    EXPECT_NEAR(meta::discrimination(s2, v2).value, d, 1e-12);
  }
}

TEST(Independence, DuplicateSingleAndIndependent) {
  const auto x = gaussian(300, 3);
  const auto y = gaussian(300, 4);
  const std::vector<meta::MetricColumn> dup{column("x", x), column("x2", x), column("y", y)};
  const auto v = meta::independence(dup);
  EXPECT_LT(v[0], 0.05);
  EXPECT_LT(v[1], 0.05);
  EXPECT_GT(v[2], 0.9);
  EXPECT_EQ(meta::independence(std::vector<meta::MetricColumn>{column("x", x)}), std::vector<double>{1.0});
  const std::vector<meta::MetricColumn> three{column("a", gaussian(2000, 5)), column("b", gaussian(2000, 6)),
                                              column("c", gaussian(2000, 7))};
  for (double i : meta::independence(three)) EXPECT_GE(i, 0.9);
}

TEST(Independence, CorrelatedPairMatchesBivariateFormula) {
  // For two normals with correlation r, 1/(R^-1)_jj = 1 - r^2.
  auto x = gaussian(5000, 8);
  auto e = gaussian(5000, 9);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 0.6 * x[i] + 0.8 * e[i];
  const auto v = meta::independence(std::vector<meta::MetricColumn>{column("x", x), column("y", y)});
  EXPECT_NEAR(v[0], 1 - 0.36, 0.03);
  EXPECT_NEAR(v[0], v[1], 1e-9);
}

TEST(Independence, MonotoneTransformInvariant) {
  auto x = gaussian(400, 10);
  auto y = gaussian(400, 11);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += 0.5 * x[i];
  const auto z = gaussian(400, 12);
  const auto base = meta::independence(std::vector<meta::MetricColumn>{column("x", x), column("y", y), column("z", z)});
  std::vector<double> tx;
  for (double v : x) tx.push_back(std::exp(v));
  std::vector<double> ty;
  for (double v : y) ty.push_back(-1.0 / (1.0 + std::exp(v)));  // increasing
  const auto moved =
      meta::independence(std::vector<meta::MetricColumn>{column("x", tx), column("y", ty), column("z", z)});
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(base[i], moved[i], 1e-12);
}

TEST(Independence, UsesSharedAccountsOnly) {
  auto a = column("a", gaussian(30, 13));
  auto b = column("b", gaussian(30, 14));
  b.account_ids.resize(5);
  b.scores.resize(5);
  EXPECT_THROW(meta::independence(std::vector<meta::MetricColumn>{a, b}), DegenerateError);
  EXPECT_NO_THROW(meta::independence(std::vector<meta::MetricColumn>{a, b}, 5));
}

TEST(Concordance, Examples) {
  EXPECT_EQ(meta::concordance(std::vector<double>{1, 2, 3, 4}, std::vector<double>{10, 20, 30, 40}), 1.0);
  EXPECT_EQ(meta::concordance(std::vector<double>{1, 2, 3, 4}, std::vector<double>{4, 3, 2, 1}), 0.0);
  EXPECT_DOUBLE_EQ(meta::concordance(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}), 2.0 / 3.0);
  EXPECT_THROW(meta::concordance(std::vector<double>{1}, std::vector<double>{1}), DegenerateError);
  EXPECT_THROW(meta::concordance(std::vector<double>{1, 2}, std::vector<double>{1}), ValidationError);
}

TEST(Concordance, MatchesPairEnumerationWithTies) {
  rng::Philox g(4, rng::Purpose::kTest, 20);
  for (std::size_t n : {2u, 3u, 17u, 64u, 200u}) {
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(g.below(7));  // plenty of ties
      b[i] = static_cast<double>(g.below(5)) + 0.1 * a[i];
    }
    EXPECT_EQ(meta::concordance(a, b), pair_oracle(a, b)) << n;
  }
}

TEST(Concordance, IncreasingTransformInvariant) {
  const auto a = gaussian(80, 21);
  auto b = gaussian(80, 22);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += a[i];
  std::vector<double> tb;
  for (double v : b) tb.push_back(std::cbrt(v) * 5 + 1);
  EXPECT_EQ(meta::concordance(a, b), meta::concordance(a, tb));
  std::vector<double> neg;
  for (double v : a) neg.push_back(-v);
  EXPECT_EQ(meta::concordance(a, a), 1.0);
  EXPECT_EQ(meta::concordance(a, neg), 0.0);
}

TEST(Concordance, ColumnsAlignOnSharedAccounts) {
  meta::MetricColumn first{"f", {"a", "b", "c", "d"}, {1, 2, 3, 4}, std::nullopt};
  meta::MetricColumn second{"s", {"e", "c", "b", "a"}, {9, 3, 1, 2}, std::nullopt};
  const auto s = meta::concordance(first, second);
  EXPECT_EQ(s.n_shared, 3u);
  EXPECT_DOUBLE_EQ(s.value, 2.0 / 3.0);  // a,b,c: [1,2,3] vs [2,1,3]
  EXPECT_DOUBLE_EQ(s.overlap, 3.0 / 5.0);
  meta::MetricColumn lonely{"l", {"a", "z"}, {1, 2}, std::nullopt};
  EXPECT_THROW(meta::concordance(first, lonely), DegenerateError);
}

TEST(Categorize, Thresholds) {
  using C = meta::ImpactCategory;
  EXPECT_EQ(meta::categorize(0.99), C::HIGH_POS);
  EXPECT_EQ(meta::categorize(0.50), C::NEUTRAL);
  EXPECT_EQ(meta::categorize(0.03), C::HIGH_NEG);
  EXPECT_EQ(meta::categorize(0.95), C::HIGH_POS);
  EXPECT_EQ(meta::categorize(0.9499), C::LOW_POS);
  EXPECT_EQ(meta::categorize(0.75), C::LOW_POS);
  EXPECT_EQ(meta::categorize(0.7499), C::NEUTRAL);
  EXPECT_EQ(meta::categorize(0.2501), C::NEUTRAL);
  EXPECT_EQ(meta::categorize(0.25), C::LOW_NEG);
  EXPECT_EQ(meta::categorize(0.0501), C::LOW_NEG);
  EXPECT_EQ(meta::categorize(0.05), C::HIGH_NEG);
  EXPECT_EQ(meta::categorize(0.0), C::HIGH_NEG);
  EXPECT_EQ(meta::categorize(1.0), C::HIGH_POS);
  EXPECT_THROW(meta::categorize(1.01), ValidationError);
  EXPECT_THROW(meta::categorize(std::nan("")), ValidationError);
  EXPECT_EQ(meta::rank(C::HIGH_NEG), 1);
  EXPECT_EQ(meta::rank(C::HIGH_POS), 5);
  EXPECT_EQ(meta::category_name(C::LOW_POS), "LOW_POS");
}

TEST(Categorize, RankConcordanceExample) {
  // Ranks [5,3,2] vs [4,4,1]: pairs (0,1) tie, (0,2) and (1,2) agree.
  std::vector<double> a, b;
  for (double q : {0.99, 0.6, 0.1}) a.push_back(meta::rank(meta::categorize(q)));
  for (double q : {0.8, 0.9, 0.01}) b.push_back(meta::rank(meta::categorize(q)));
  EXPECT_EQ(a, (std::vector<double>{5, 3, 2}));
  EXPECT_EQ(b, (std::vector<double>{4, 4, 1}));
  EXPECT_DOUBLE_EQ(meta::concordance(a, b), 2.5 / 3.0);
}

TEST(NormalScores, SymmetricAndTieAveraged) {
  const auto z = meta::normal_scores(std::vector<double>{3, 1, 2, 2});
  EXPECT_NEAR(z[0], -z[1], 1e-12);
  EXPECT_EQ(z[2], z[3]);
  EXPECT_NEAR(z[2], 0.0, 1e-12);
}
