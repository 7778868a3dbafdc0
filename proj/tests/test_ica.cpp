#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cbss/evalmetrics.hpp"
#include "cbss/ica.hpp"
#include "cbss/synthdata.hpp"

namespace cbss {
namespace {

double corr(const Vector& a, const Vector& b) {
  const Vector ca = a.array() - a.mean(), cb = b.array() - b.mean();
  return ca.dot(cb) / (ca.norm() * cb.norm());
}

Matrix rotation2(double angle) {
  Matrix R(2, 2);
  R << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return R;
}

TEST(Whiten, IdentityCovariance) {
  const Matrix S = gen_p0(3, 5000, 1);
  const Matrix X = gen_mixing(3, 2) * S;
  auto [w, Z] = whiten(X);
  const double T = static_cast<double>(Z.cols());
  EXPECT_LE((Z * Z.transpose() / T - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE(Z.rowwise().mean().cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((w.apply(X) - Z).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Whiten, AlreadyWhiteGivesOrthogonalMap) {
  auto [w0, Z0] = whiten(gen_mixing(3, 4) * gen_p0(3, 3000, 3));
  auto [w1, Z1] = whiten(Z0);
  EXPECT_LE((w1.W * w1.W.transpose() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Whiten, ScaleInvariant) {
  const Matrix X = gen_mixing(2, 5) * gen_p0(2, 1000, 6);
  const Matrix Z1 = whiten(X).second;
  const Matrix Z3 = whiten(3.0 * X).second;
  EXPECT_LE((Z1 - Z3).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Whiten, RankDeficientNamesCount) {
  Matrix X = gen_p0(3, 500, 7);
  X.row(2) = X.row(0) - X.row(1);
  try {
    whiten(X);
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("1 of 3"), std::string::npos) << e.what();
  }
}

TEST(RunIca, RecoversIndependentUniforms) {
  const Matrix S = gen_p0(2, 10000, 8);
  const Matrix Z = whiten(S).second;
  const UnmixingEstimate est = run_ica(Z, 1);
  EXPECT_TRUE(est.converged);
  const Matrix Y = est.B_hat * Z;
  for (Eigen::Index i = 0; i < 2; ++i) {
    double best = 0.0;
    for (Eigen::Index j = 0; j < 2; ++j)
      best = std::max(best, std::abs(corr(Y.row(j).transpose(), S.row(i).transpose())));
    EXPECT_GE(best, 0.99);
  }
}

TEST(RunIca, RotationIsOrthogonal) {
  const Matrix Z = whiten(gen_mixing(4, 9) * gen_p0(4, 4000, 10)).second;
  const UnmixingEstimate est = run_ica(Z, 2);
  EXPECT_LE((est.B_hat * est.B_hat.transpose() - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(RunIca, UndoesFortyFiveDegreeRotation) {
  const Matrix S = gen_p0(2, 10000, 11);
  const Matrix X = rotation2(M_PI / 4) * S;
  const FixedPointIca ica;
  const UnmixingEstimate est = ica(X, 3);
  EXPECT_LT(mse(est.B_hat * X, S), 1e-2);
}

TEST(RunIca, LogCoshContrast) {
  const Matrix S = gen_p0(3, 6000, 12);
  const Matrix X = gen_mixing(3, 13) * S;
  FixedPointIca ica;
  ica.options.contrast = Contrast::LogCosh;
  const UnmixingEstimate est = ica(X, 4);
  EXPECT_TRUE(est.converged);
  EXPECT_LT(mse(est.B_hat * X, S), 1e-2);
}

TEST(RunIca, GaussianDataStaysFinite) {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g;
  Matrix X(2, 2000);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = g(rng);
  IcaOptions opt;
  opt.max_iterations = 50;
  const UnmixingEstimate est = run_ica(whiten(X).second, 5, opt);
  EXPECT_TRUE(est.B_hat.allFinite());
  EXPECT_LE(est.iterations, 100);
}

TEST(Separate, ScaledPermutationOfMixingInverse) {
  const Matrix S = gen_p0(3, 10000, 15);
  const Matrix A = gen_mixing(3, 16);
  const SeparationResult r = separate_unclassified(A * S, 6);
  const Matrix P = r.unmixing.B_hat * A;
  for (Eigen::Index i = 0; i < 3; ++i) {
    Eigen::Index arg = 0;
    const double big = P.row(i).cwiseAbs().maxCoeff(&arg);
    for (Eigen::Index j = 0; j < 3; ++j)
      if (j != arg) EXPECT_LT(std::abs(P(i, j)) / big, 0.1);
  }
}

TEST(Separate, PureP0AtEtaOne) {
  const Matrix S = gen_p0(2, 2000, 17);
  const SeparationResult r = separate(S, 6, 1.0, 7);
  EXPECT_EQ(r.retained_count, r.report.count(0));
  EXPECT_LT(mse(r.S_hat, S), 1e-2);
}

TEST(Separate, OutputIsUnmixingTimesData) {
  MixtureSpec spec;
  const GeneratedData g = gen_mixture(spec, 1500, 18);
  const SeparationResult r = separate(g.X, 4, 0.5, 8);
  EXPECT_EQ(r.S_hat, r.unmixing.B_hat * g.X);
}

TEST(Separate, Deterministic) {
  MixtureSpec spec;
  const GeneratedData g = gen_mixture(spec, 1500, 19);
  const SeparationResult a = separate(g.X, 4, 0.5, 9);
  const SeparationResult b = separate(g.X, 4, 0.5, 9);
  EXPECT_EQ(a.S_hat, b.S_hat);
  EXPECT_EQ(a.report.labels, b.report.labels);
}

TEST(Separate, AllZeroLabelsMatchPlainIca) {
  MixtureSpec spec;
  const GeneratedData g = gen_mixture(spec, 1000, 20);
  const SeparationResult a = separate_supervised(g.X, std::vector<int>(1000, 0), 10);
  const UnmixingEstimate b = FixedPointIca{}(g.X, 10);
  EXPECT_EQ(a.unmixing.B_hat, b.B_hat);
  EXPECT_EQ(a.retained_count, 1000u);
}

TEST(Separate, AllOneLabelsFail) {
  MixtureSpec spec;
  const GeneratedData g = gen_mixture(spec, 500, 21);
  try {
    separate_supervised(g.X, std::vector<int>(500, 1), 11);
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("only 0 samples retained"), std::string::npos) << e.what();
  }
  EXPECT_THROW(separate_supervised(g.X, std::vector<int>(499, 0), 11), std::invalid_argument);
}

TEST(Separate, AffineEquivariance) {
  MixtureSpec spec;
  spec.eta = 0.6;
  const GeneratedData g = gen_mixture(spec, 2000, 22);
  const Matrix B = gen_mixing(5, 23, 50.0);
  const SeparationResult a = separate(g.X, 4, spec.eta, 12);
  const SeparationResult b = separate(B * g.X, 4, spec.eta, 12);
  for (std::size_t t = 0; t < a.report.theta.size(); ++t)
    ASSERT_NEAR(a.report.theta[t], b.report.theta[t], 1e-6 * a.report.theta[t]);
  EXPECT_NEAR(mse(a.S_hat, g.S), mse(b.S_hat, g.S), 1e-3);
}

struct CountingIca {
  int* calls;
  UnmixingEstimate operator()(const Matrix& X, std::uint64_t) const {
    ++*calls;
    UnmixingEstimate e;
    e.B_hat = Matrix::Identity(X.rows(), X.rows());
    e.converged = true;
    return e;
  }
};

TEST(Separate, PluggableBackend) {
  MixtureSpec spec;
  const GeneratedData g = gen_mixture(spec, 800, 24);
  int calls = 0;
  const SeparationResult r = separate(g.X, 2, 0.5, 1, ClassifyOptions{}, CountingIca{&calls});
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(r.S_hat, g.X);
}

}  // namespace
}  // namespace cbss
