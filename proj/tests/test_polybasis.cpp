#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "cbss/polybasis.hpp"

namespace cbss {
namespace {

// Every exponent vector in [0, d]^n with total degree <= d, sorted by degree
// then descending lexicographic order. Independent of the recursive builder.
std::vector<MultiIndex> brute_force_basis(std::size_t n, unsigned d) {
  std::vector<MultiIndex> out;
  MultiIndex a(n, 0);
  for (;;) {
    if (total_degree(a) <= d) out.push_back(a);
    std::size_t i = 0;
    while (i < n && a[i] == d) a[i++] = 0;
    if (i == n) break;
    ++a[i];
  }
  std::sort(out.begin(), out.end(), [](const MultiIndex& x, const MultiIndex& y) {
    const unsigned dx = total_degree(x), dy = total_degree(y);
    if (dx != dy) return dx < dy;
    return x > y;
  });
  return out;
}

TEST(BasisSize, MatchesTable) {
  // n = 2, 3, 5, 8 against d = 1, 2, 4, 6, 8.
  const std::vector<std::vector<std::uint64_t>> table = {
      {3, 6, 15, 28, 45}, {4, 10, 35, 84, 165}, {6, 21, 126, 462, 1287}, {9, 45, 495, 3003, 12870}};
  const std::size_t ns[] = {2, 3, 5, 8};
  const unsigned ds[] = {1, 2, 4, 6, 8};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(basis_size(ns[i], ds[j]), table[i][j]);
  EXPECT_EQ(basis_size(1, 0), 1u);
  EXPECT_EQ(basis_size(3, 4), 35u);
}

TEST(BasisSize, LargeExactAndOverflow) {
  EXPECT_EQ(basis_size(30, 30), 118264581564861424ULL);  // C(60, 30)
  EXPECT_THROW(basis_size(100, 100), std::overflow_error);
  EXPECT_THROW(basis_size(0, 3), std::invalid_argument);
}

TEST(MonomialBasis, TwoVariablesDegreeTwo) {
  const MonomialBasis b(2, 2);
  const std::vector<MultiIndex> expected = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  EXPECT_EQ(b.indices(), expected);
}

TEST(MonomialBasis, TwoVariablesDegreeThree) {
  const MonomialBasis b(2, 3);
  const std::vector<MultiIndex> expected = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1},
                                            {0, 2}, {3, 0}, {2, 1}, {1, 2}, {0, 3}};
  EXPECT_EQ(b.indices(), expected);
  EXPECT_EQ(monomial_string(b[9]), "x2^3");
}

TEST(MonomialBasis, SizesAndDegreeZero) {
  EXPECT_EQ(MonomialBasis(5, 6).size(), 462u);
  const MonomialBasis c(3, 0);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0], MultiIndex(3, 0));
  EXPECT_THROW(MonomialBasis(0, 2), std::invalid_argument);
}

TEST(MonomialBasis, MatchesBruteForceOrder) {
  for (std::size_t n = 1; n <= 4; ++n)
    for (unsigned d = 0; d <= 5; ++d) EXPECT_EQ(MonomialBasis(n, d).indices(), brute_force_basis(n, d));
}

TEST(MonomialBasis, InvariantsUpToEight) {
  for (std::size_t n = 1; n <= 8; ++n) {
    for (unsigned d = 0; d <= 8; ++d) {
      if (basis_size(n, d) > 20000) continue;
      const MonomialBasis b(n, d);
      ASSERT_EQ(b.size(), basis_size(n, d)) << "n=" << n << " d=" << d;
      EXPECT_EQ(b[0], MultiIndex(n, 0));
      std::set<MultiIndex> seen(b.indices().begin(), b.indices().end());
      EXPECT_EQ(seen.size(), b.size());
      for (std::size_t k = 1; k < b.size(); ++k) {
        const unsigned prev = total_degree(b[k - 1]), cur = total_degree(b[k]);
        ASSERT_LE(prev, cur);
        if (prev == cur) {
          ASSERT_GT(b[k - 1], b[k]);
        }
      }
    }
  }
}

TEST(Embed, PointTwoThree) {
  const MonomialBasis b(2, 2);
  const Vector v = b.embed(Vector{{2.0, 3.0}});
  const Vector expected{{1, 2, 3, 4, 6, 9}};
  EXPECT_EQ(v, expected);
}

TEST(Embed, ZerosAndOnes) {
  const MonomialBasis b(4, 5);
  const Vector z = b.embed(Vector::Zero(4));
  EXPECT_EQ(z[0], 1.0);
  EXPECT_EQ(z.tail(z.size() - 1).cwiseAbs().maxCoeff(), 0.0);
  const Vector o = b.embed(Vector::Ones(4));
  EXPECT_EQ(o, Vector::Ones(static_cast<Eigen::Index>(b.size())));
}

TEST(Embed, RejectsWrongLength) {
  const MonomialBasis b(3, 2);
  EXPECT_THROW(b.embed(Vector::Zero(2)), std::invalid_argument);
  EXPECT_THROW(b.embed_columns(Matrix::Zero(2, 4)), std::invalid_argument);
}

TEST(Embed, ColumnsMatchPointwise) {
  const MonomialBasis b(3, 4);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Matrix X(3, 17);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = g(rng);
  const Matrix V = b.embed_columns(X);
  for (Eigen::Index t = 0; t < X.cols(); ++t) EXPECT_EQ(V.col(t), b.embed(Vector(X.col(t))));
}

// Entry alpha equals the product of entries beta and alpha - beta.
TEST(EmbedProperty, MultiplicativeAcrossSplits) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<std::size_t> pick;
  for (std::size_t n : {2u, 3u, 5u}) {
    const MonomialBasis b(n, 6);
    for (int rep = 0; rep < 50; ++rep) {
      Vector x(static_cast<Eigen::Index>(n));
      for (auto& v : x) v = g(rng);
      const Vector e = b.embed(x);
      const MultiIndex& alpha = b[pick(rng) % b.size()];
      MultiIndex beta(n);
      for (std::size_t i = 0; i < n; ++i) beta[i] = alpha[i] == 0 ? 0 : static_cast<unsigned>(pick(rng) % (alpha[i] + 1));
      MultiIndex gamma(n);
      for (std::size_t i = 0; i < n; ++i) gamma[i] = alpha[i] - beta[i];
      const double lhs = e[static_cast<Eigen::Index>(b.find(alpha))];
      const double rhs = e[static_cast<Eigen::Index>(b.find(beta))] * e[static_cast<Eigen::Index>(b.find(gamma))];
      EXPECT_NEAR(lhs, rhs, 1e-13 * std::max(1.0, std::abs(lhs)));
    }
  }
}

// Scaling by 2 is exact in binary floating point, so the check is exact.
TEST(EmbedProperty, HomogeneousScaling) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  const MonomialBasis b(3, 6);
  for (int rep = 0; rep < 20; ++rep) {
    Vector x(3);
    for (auto& v : x) v = g(rng);
    const Vector e = b.embed(x);
    const Vector e2 = b.embed(Vector(2.0 * x));
    for (std::size_t k = 0; k < b.size(); ++k)
      EXPECT_EQ(e2[static_cast<Eigen::Index>(k)],
                std::ldexp(e[static_cast<Eigen::Index>(k)], static_cast<int>(total_degree(b[k]))));
  }
}

}  // namespace
}  // namespace cbss
