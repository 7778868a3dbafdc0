#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cbss/christoffel.hpp"
#include "cbss/polybasis.hpp"

namespace cbss {

struct WhiteningTransform {
  Matrix W;
  Vector mean;

  Matrix apply(const Matrix& X) const { return W * (X.colwise() - mean); }
};

namespace detail {

// Flips each eigenvector so its largest-magnitude entry is positive.
inline void fix_eigenvector_signs(Matrix& E) {
  for (Eigen::Index j = 0; j < E.cols(); ++j) {
    Eigen::Index arg = 0;
    E.col(j).cwiseAbs().maxCoeff(&arg);
    if (E(arg, j) < 0) E.col(j) = -E.col(j);
  }
}

// (W W^T)^{-1/2} W
inline Matrix symmetric_orthogonalize(const Matrix& W) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(W * W.transpose());
  const Matrix inv_sqrt = es.eigenvectors() *
                          es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                          es.eigenvectors().transpose();
  return inv_sqrt * W;
}

// Largest angle between corresponding rows of two orthogonal matrices, up to
// row sign. Uses the chord length so angles near zero keep full precision.
inline double max_row_angle(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double chord = std::min((a.row(i) - b.row(i)).norm(), (a.row(i) + b.row(i)).norm());
    worst = std::max(worst, 2.0 * std::asin(std::min(1.0, chord / 2.0)));
  }
  return worst;
}

inline Matrix random_rotation(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix G(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) G(i, j) = g(rng);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j)
    if (R(j, j) < 0) Q.col(j) = -Q.col(j);
  return Q.transpose();
}

}  // namespace detail

/// Centres and whitens X so the output has identity empirical covariance.
/// W = D^{-1/2} E^T from the covariance eigendecomposition (ascending order,
/// largest-magnitude entry of each eigenvector positive).
inline std::pair<WhiteningTransform, Matrix> whiten(const Matrix& X) {
  check_observations(X);
  const Eigen::Index n = X.rows();
  const double T = static_cast<double>(X.cols());
  WhiteningTransform w;
  w.mean = X.rowwise().sum() / T;
  const Matrix centered = X.colwise() - w.mean;
  Matrix cov = centered * centered.transpose() / T;
  cov = 0.5 * (cov + cov.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const Vector& ev = es.eigenvalues();
  const double hi = ev[n - 1];
  Eigen::Index deficient = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(ev[i] > 1e-12 * hi) || !(hi > 0)) ++deficient;
  if (deficient > 0)
    throw std::runtime_error("whiten: covariance is rank deficient (" + std::to_string(deficient) +
                             " of " + std::to_string(n) + " directions degenerate)");
  Matrix E = es.eigenvectors();
  detail::fix_eigenvector_signs(E);
  w.W = ev.cwiseSqrt().cwiseInverse().asDiagonal() * E.transpose();
  Matrix Z = w.W * centered;
  return {std::move(w), std::move(Z)};
}

enum class Contrast { Kurtosis, LogCosh };

struct IcaOptions {
  Contrast contrast = Contrast::Kurtosis;
  double tolerance = 1e-9;  // radians, largest row change between iterations
  int max_iterations = 500;
};

struct UnmixingEstimate {
  Matrix B_hat;     // estimated inverse of the mixing matrix
  int iterations = 0;
  bool converged = false;
};

namespace detail {

struct FixedPointRun {
  Matrix W;
  int iterations = 0;
  bool converged = false;
  double last_step = 0.0;
};

inline FixedPointRun fixed_point_iterate(const Matrix& Z, Matrix W, const IcaOptions& opt) {
  const double T = static_cast<double>(Z.cols());
  FixedPointRun run;
  run.last_step = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const Matrix Y = W * Z;
    Matrix G(Y.rows(), Y.cols());
    Vector dg(Y.rows());
    if (opt.contrast == Contrast::Kurtosis) {
      G = Y.array().cube().matrix();
      dg = 3.0 * Y.array().square().rowwise().sum().matrix() / T;
    } else {
      G = Y.array().tanh().matrix();
      dg = (1.0 - G.array().square()).rowwise().sum().matrix() / T;
    }
    Matrix next = G * Z.transpose() / T - dg.asDiagonal() * W;
    next = symmetric_orthogonalize(next);
    run.last_step = max_row_angle(next, W);
    W = std::move(next);
    run.iterations = it;
    if (run.last_step < opt.tolerance) {
      run.converged = true;
      break;
    }
  }
  run.W = std::move(W);
  return run;
}

}  // namespace detail

/// Symmetric fixed-point ICA on whitened data (all rows updated together,
/// then jointly re-orthogonalised). Starts from the identity; if that does
/// not converge, retries once from a seeded random rotation and keeps the
/// better run. The returned B_hat is the orthogonal rotation to apply to the
/// whitened data.
inline UnmixingEstimate run_ica(const Matrix& white, std::uint64_t seed, const IcaOptions& opt = {}) {
  check_observations(white);
  const Eigen::Index n = white.rows();
  detail::FixedPointRun best = detail::fixed_point_iterate(white, Matrix::Identity(n, n), opt);
  int total = best.iterations;
  if (!best.converged) {
    detail::FixedPointRun retry =
        detail::fixed_point_iterate(white, detail::random_rotation(n, seed), opt);
    total += retry.iterations;
    if (retry.converged || retry.last_step < best.last_step) best = std::move(retry);
  }
  return {std::move(best.W), total, best.converged};
}

/// Default ICA back end: whitening followed by run_ica. Any callable with the
/// same signature can be passed to separate() instead.
struct FixedPointIca {
  IcaOptions options;

  UnmixingEstimate operator()(const Matrix& X, std::uint64_t seed) const {
    auto [w, Z] = whiten(X);
    UnmixingEstimate est = run_ica(Z, seed, options);
    est.B_hat = (est.B_hat * w.W).eval();
    return est;
  }
};

struct SeparationResult {
  Matrix S_hat;
  UnmixingEstimate unmixing;
  ScoreReport report;
  std::size_t retained_count = 0;
};

inline std::size_t min_retained(std::size_t n) { return std::max(10 * n, n + 1); }

/// Runs the unmixing stage on the columns of X labelled 0 and applies the
/// estimate to every column.
template <class Ica = FixedPointIca>
SeparationResult separate_with_labels(const Matrix& X, ScoreReport report, std::uint64_t seed,
                                      const Ica& ica = {}) {
  check_observations(X);
  if (report.labels.size() != static_cast<std::size_t>(X.cols()))
    throw std::invalid_argument("separate: " + std::to_string(report.labels.size()) +
                                " labels for " + std::to_string(X.cols()) + " samples");
  std::vector<Eigen::Index> keep;
  for (std::size_t t = 0; t < report.labels.size(); ++t)
    if (report.labels[t] == 0) keep.push_back(static_cast<Eigen::Index>(t));
  const std::size_t floor = min_retained(static_cast<std::size_t>(X.rows()));
  if (keep.size() < floor)
    throw std::runtime_error("separate: only " + std::to_string(keep.size()) +
                             " samples retained, need at least " + std::to_string(floor));
  const Matrix X0 = X(Eigen::all, keep);

  SeparationResult r;
  r.unmixing = ica(X0, seed);
  r.S_hat = r.unmixing.B_hat * X;
  r.report = std::move(report);
  r.retained_count = keep.size();
  return r;
}

/// Classify, keep the samples scored above the threshold, unmix them, and
/// apply the unmixing to all samples.
template <class Ica = FixedPointIca>
SeparationResult separate(const Matrix& X, unsigned d, double eta, std::uint64_t seed,
                          const ClassifyOptions& copt = {}, const Ica& ica = {}) {
  return separate_with_labels(X, classify(X, d, eta, copt), seed, ica);
}

/// Baseline that subsets on known labels instead of classifying.
template <class Ica = FixedPointIca>
SeparationResult separate_supervised(const Matrix& X, const std::vector<int>& true_labels,
                                     std::uint64_t seed, const Ica& ica = {}) {
  ScoreReport report;
  report.labels = true_labels;
  report.dimension = static_cast<std::size_t>(X.rows());
  return separate_with_labels(X, std::move(report), seed, ica);
}

/// Baseline that runs ICA on every sample (every label 0).
template <class Ica = FixedPointIca>
SeparationResult separate_unclassified(const Matrix& X, std::uint64_t seed, const Ica& ica = {}) {
  return separate_supervised(X, std::vector<int>(static_cast<std::size_t>(X.cols()), 0), seed, ica);
}

}  // namespace cbss
