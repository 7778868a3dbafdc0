#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbss/polybasis.hpp"

namespace cbss {

/// Throws unless X (n rows = variables, T columns = samples) is a usable
/// observation set: n >= 1, T >= 1, all entries finite.
inline void check_observations(const Matrix& X) {
  if (X.rows() < 1) throw std::invalid_argument("observations: need at least one variable");
  if (X.cols() < 1) throw std::invalid_argument("observations: need at least one sample");
  if (!X.allFinite()) throw std::invalid_argument("observations: non-finite entry");
}

struct FirstOrderStats {
  Vector mean;
  Matrix covariance;  // 1/T normalisation
  Matrix extended;    // (1/T) sum [1; x][1, x^T]
};

inline FirstOrderStats first_order_stats(const Matrix& X) {
  check_observations(X);
  const double T = static_cast<double>(X.cols());
  FirstOrderStats s;
  s.mean = X.rowwise().sum() / T;
  const Matrix centered = X.colwise() - s.mean;
  s.covariance = centered * centered.transpose() / T;
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose()).eval();
  const auto n = X.rows();
  s.extended.resize(n + 1, n + 1);
  s.extended(0, 0) = 1.0;
  s.extended.block(1, 0, n, 1) = s.mean;
  s.extended.block(0, 1, 1, n) = s.mean.transpose();
  s.extended.block(1, 1, n, n) = X * X.transpose() / T;
  return s;
}

struct MomentOptions {
  /// Eigenvalues below eigen_cutoff * largest are dropped from the inverse.
  double eigen_cutoff = 1e-10;
  /// Largest basis size accepted.
  std::size_t max_size = 5000;
  /// Column block size at the leaves of the pairwise summation.
  Eigen::Index leaf = 128;
  /// Factorise the moment matrix of affinely standardised data. Scores are
  /// unchanged in exact arithmetic and the factorised matrix is far better
  /// conditioned than the raw one.
  bool standardize = true;
};

namespace detail {

// Sum of V(:, t) V(:, t)^T over [begin, end) as a balanced binary tree of
// blocks, so the result does not depend on how the caller partitions T.
inline Matrix pairwise_gram(const Matrix& V, Eigen::Index begin, Eigen::Index end,
                            Eigen::Index leaf) {
  const Eigen::Index len = end - begin;
  if (len <= leaf) {
    Matrix G = Matrix::Zero(V.rows(), V.rows());
    G.selfadjointView<Eigen::Lower>().rankUpdate(V.middleCols(begin, len));
    G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
    return G;
  }
  const Eigen::Index mid = begin + len / 2;
  Matrix G = pairwise_gram(V, begin, mid, leaf);
  G += pairwise_gram(V, mid, end, leaf);
  return G;
}

inline Matrix average_gram(const Matrix& V, Eigen::Index leaf) {
  Matrix G = pairwise_gram(V, 0, V.cols(), std::max<Eigen::Index>(leaf, 1));
  G /= static_cast<double>(V.cols());
  return 0.5 * (G + G.transpose());
}

}  // namespace detail

/// Empirical moment matrix (1/T) sum_t [x_t]_d [x_t]_d^T together with a
/// truncated eigendecomposition used to evaluate the Christoffel-Darboux kernel.
class MomentMatrix {
 public:
  /// Builds from an n x T observation matrix.
  static MomentMatrix build(const Matrix& X, unsigned d, const MomentOptions& opt = {}) {
    check_observations(X);
    const std::size_t n = static_cast<std::size_t>(X.rows());
    const std::uint64_t m = basis_size(n, d);
    if (m > opt.max_size)
      throw std::length_error("moment matrix: basis size " + std::to_string(m) +
                              " exceeds cap " + std::to_string(opt.max_size));
    MomentMatrix M(MonomialBasis(n, d), opt);
    M.samples_ = static_cast<std::size_t>(X.cols());
    M.raw_ = detail::average_gram(M.basis_.embed_columns(X), opt.leaf);

    if (opt.standardize) {
      M.set_standardization(X);
      const Matrix Z = M.standardize(X);
      M.factorize(detail::average_gram(M.basis_.embed_columns(Z), opt.leaf));
    } else {
      M.shift_ = Vector::Zero(static_cast<Eigen::Index>(n));
      M.transform_ = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      M.factorize(M.raw_);
    }
    return M;
  }

  /// Wraps an explicit symmetric matrix indexed by the (n, d) monomial basis.
  static MomentMatrix from_matrix(const Matrix& raw, std::size_t n, unsigned d,
                                  const MomentOptions& opt = {}) {
    MomentMatrix M(MonomialBasis(n, d), opt);
    const auto m = static_cast<Eigen::Index>(M.basis_.size());
    if (raw.rows() != m || raw.cols() != m)
      throw std::invalid_argument("from_matrix: expected " + std::to_string(m) + "x" +
                                  std::to_string(m) + " matrix");
    if (!raw.allFinite()) throw std::invalid_argument("from_matrix: non-finite entry");
    M.raw_ = 0.5 * (raw + raw.transpose());
    M.shift_ = Vector::Zero(static_cast<Eigen::Index>(n));
    M.transform_ = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    M.factorize(M.raw_);
    return M;
  }

  const Matrix& matrix() const { return raw_; }
  const MonomialBasis& basis() const { return basis_; }
  std::size_t dimension() const { return basis_.dimension(); }
  unsigned degree() const { return basis_.degree(); }
  std::size_t size() const { return basis_.size(); }
  std::size_t samples() const { return samples_; }

  /// Eigenvalues of the factorised matrix, ascending.
  const Vector& eigenvalues() const { return eigenvalues_; }
  /// Directions dropped by the eigenvalue cutoff.
  std::size_t truncated() const { return truncated_; }
  bool condition_warning() const { return truncated_ > 0; }
  /// lambda_max / lambda_min of the factorised matrix (infinite if singular).
  double condition_number() const {
    const double lo = eigenvalues_[0];
    const double hi = eigenvalues_[eigenvalues_.size() - 1];
    return lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
  }

  /// kappa(x, y) = [x]^T M^{-1} [y].
  double kernel(const Vector& x, const Vector& y) const {
    const Vector a = project(x);
    const Vector b = project(y);
    return a.dot(inverse_eigenvalues_.cwiseProduct(b));
  }

  /// Inverse Christoffel function at x, i.e. kernel(x, x).
  double score(const Vector& x) const {
    const Vector a = project(x);
    return a.dot(inverse_eigenvalues_.cwiseProduct(a));
  }

  /// Scores of every column of X.
  Vector scores(const Matrix& X) const {
    if (static_cast<std::size_t>(X.rows()) != dimension())
      throw std::invalid_argument("scores: data dimension " + std::to_string(X.rows()) +
                                  " does not match moment matrix dimension " +
                                  std::to_string(dimension()));
    const Matrix Y = eigenvectors_.transpose() * basis_.embed_columns(standardize(X));
    return (inverse_eigenvalues_.asDiagonal() * Y.cwiseAbs2()).colwise().sum().transpose();
  }

 private:
  MomentMatrix(MonomialBasis basis, const MomentOptions& opt)
      : basis_(std::move(basis)), cutoff_(opt.eigen_cutoff) {}

  // Picks an invertible affine map z = L (x - mean): full whitening when the
  // covariance is well conditioned, otherwise centring plus isotropic scaling.
  void set_standardization(const Matrix& X) {
    const auto n = X.rows();
    const FirstOrderStats s = first_order_stats(X);
    shift_ = s.mean;
    Eigen::SelfAdjointEigenSolver<Matrix> es(s.covariance);
    const Vector& ev = es.eigenvalues();
    const double hi = ev[n - 1];
    if (hi > 0 && ev[0] > 1e-12 * hi) {
      transform_ = ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    } else if (hi > 0) {
      transform_ = Matrix::Identity(n, n) / std::sqrt(hi);
    } else {
      transform_ = Matrix::Identity(n, n);
    }
  }

  Matrix standardize(const Matrix& X) const { return transform_ * (X.colwise() - shift_); }

  Vector project(const Vector& x) const {
    if (static_cast<std::size_t>(x.size()) != dimension())
      throw std::invalid_argument("point dimension " + std::to_string(x.size()) +
                                  " does not match moment matrix dimension " +
                                  std::to_string(dimension()));
    const Vector z = transform_ * (x - shift_);
    return eigenvectors_.transpose() * basis_.embed(z);
  }

  void factorize(const Matrix& F) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(F);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("moment matrix: eigendecomposition failed");
    eigenvalues_ = es.eigenvalues();
    eigenvectors_ = es.eigenvectors();
    const double hi = eigenvalues_[eigenvalues_.size() - 1];
    if (!(hi > 0)) throw std::runtime_error("moment matrix: numerical rank is 0");
    inverse_eigenvalues_.resize(eigenvalues_.size());
    truncated_ = 0;
    for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i) {
      if (eigenvalues_[i] < cutoff_ * hi) {
        inverse_eigenvalues_[i] = 0.0;
        ++truncated_;
      } else {
        inverse_eigenvalues_[i] = 1.0 / eigenvalues_[i];
      }
    }
  }

  MonomialBasis basis_;
  double cutoff_;
  std::size_t samples_ = 0;
  Matrix raw_;
  Vector shift_;
  Matrix transform_;
  Vector eigenvalues_;
  Matrix eigenvectors_;
  Vector inverse_eigenvalues_;
  std::size_t truncated_ = 0;
};

/// Christoffel function C(x) = 1 / kappa(x, x).
inline double christoffel_value(const Vector& x, const MomentMatrix& M) { return 1.0 / M.score(x); }

/// Minimum of p^T M p over coefficient vectors with p^T [z] = 1, from a direct
/// solve of the KKT system on the raw matrix. Independent of the
/// eigendecomposition used by MomentMatrix::score.
inline double variational_oracle(const Vector& z, const MomentMatrix& M) {
  const Vector v = M.basis().embed(z);
  const auto m = static_cast<Eigen::Index>(M.size());
  Matrix K = Matrix::Zero(m + 1, m + 1);
  K.topLeftCorner(m, m) = M.matrix();
  K.block(0, m, m, 1) = v;
  K.block(m, 0, 1, m) = v.transpose();
  Vector rhs = Vector::Zero(m + 1);
  rhs[m] = 1.0;
  Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible()) throw std::runtime_error("variational_oracle: singular KKT system");
  const Vector p = lu.solve(rhs).head(m);
  return p.dot(M.matrix() * p);
}

/// theta_bar = eta * C(n+d, n).
inline double threshold(double eta, std::size_t n, unsigned d) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("threshold: eta must lie in [0, 1]");
  return eta * static_cast<double>(basis_size(n, d));
}

/// Which mixture weight scales the threshold. P0 uses eta = P(r = 0) itself;
/// P1 uses 1 - eta, the weight of the singular component.
enum class ThresholdWeight { P0, P1 };

inline std::string to_string(ThresholdWeight w) { return w == ThresholdWeight::P0 ? "p0" : "p1"; }

inline ThresholdWeight parse_threshold_weight(const std::string& s) {
  if (s == "p0") return ThresholdWeight::P0;
  if (s == "p1") return ThresholdWeight::P1;
  throw std::invalid_argument("unknown threshold weight '" + s + "' (expected p0 or p1)");
}

struct ClassifyOptions {
  MomentOptions moment;
  ThresholdWeight weight = ThresholdWeight::P0;
};

/// Label 0 (kept for unmixing) when theta > threshold, 1 otherwise; ties go to 0.
inline std::vector<int> threshold_labels(const Vector& theta, double theta_bar) {
  std::vector<int> labels(static_cast<std::size_t>(theta.size()));
  for (Eigen::Index t = 0; t < theta.size(); ++t)
    labels[static_cast<std::size_t>(t)] = theta[t] >= theta_bar ? 0 : 1;
  return labels;
}

struct ScoreReport {
  std::vector<double> theta;
  double threshold = 0.0;
  std::vector<int> labels;
  std::size_t dimension = 0;
  unsigned degree = 0;
  double eta_used = 0.0;
  ThresholdWeight weight = ThresholdWeight::P0;
  std::size_t basis_size = 0;
  std::size_t truncated = 0;
  bool condition_warning = false;
  bool undersampled = false;  // T <= basis size

  std::size_t count(int label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
  }
};

/// Scores every sample with the empirical inverse Christoffel function and
/// labels it against eta * C(n+d, n) (or (1 - eta) * C(n+d, n), see
/// ThresholdWeight).
inline ScoreReport classify(const Matrix& X, unsigned d, double eta, const ClassifyOptions& opt = {}) {
  check_observations(X);
  const double w = opt.weight == ThresholdWeight::P0 ? eta : 1.0 - eta;
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("classify: eta must lie in [0, 1]");
  const double theta_bar = threshold(w, static_cast<std::size_t>(X.rows()), d);
  const MomentMatrix M = MomentMatrix::build(X, d, opt.moment);
  const Vector theta = M.scores(X);
  ScoreReport r;
  r.theta.assign(theta.data(), theta.data() + theta.size());
  r.threshold = theta_bar;
  r.labels = threshold_labels(theta, theta_bar);
  r.dimension = M.dimension();
  r.degree = d;
  r.eta_used = eta;
  r.weight = opt.weight;
  r.basis_size = M.size();
  r.truncated = M.truncated();
  r.condition_warning = M.condition_warning();
  r.undersampled = M.samples() <= M.size();
  return r;
}

}  // namespace cbss
