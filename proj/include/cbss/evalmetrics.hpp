#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbss/polybasis.hpp"

namespace cbss {

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// O(n^3)). Returns assignment[row] = column.
inline std::vector<std::size_t> hungarian(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw std::invalid_argument("hungarian: cost must be square");
  const std::size_t n = static_cast<std::size_t>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; p[j] is the row matched to column j (0 = none).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) -
                           u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

/// Matching of estimated to true sources. permutation[i] is the row of the
/// estimate paired with true source i; scales[i] multiplies that row.
struct Alignment {
  std::vector<std::size_t> permutation;
  std::vector<double> scales;
};

namespace detail {

inline double abs_correlation(const Vector& a, const Vector& b) {
  const Vector ca = a.array() - a.mean();
  const Vector cb = b.array() - b.mean();
  const double na = ca.norm();
  const double nb = cb.norm();
  if (!(na > 0) || !(nb > 0)) return 0.0;
  return std::abs(ca.dot(cb)) / (na * nb);
}

inline void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace detail

/// Pairs rows by maximum total absolute correlation, then fits each pair's
/// scale by least squares (S_true row onto the matched estimate).
inline Alignment align(const Matrix& S_hat, const Matrix& S_true) {
  detail::check_same_shape(S_hat, S_true, "align");
  const Eigen::Index n = S_true.rows();
  Matrix cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      cost(i, j) = -detail::abs_correlation(S_true.row(i).transpose(), S_hat.row(j).transpose());
  Alignment a;
  a.permutation = hungarian(cost);
  a.scales.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto est = S_hat.row(static_cast<Eigen::Index>(a.permutation[static_cast<std::size_t>(i)]));
    const double num = est.dot(S_true.row(i));
    const double den = est.squaredNorm();
    const double s = den > 0 ? num / den : 0.0;
    a.scales[static_cast<std::size_t>(i)] = s != 0.0 ? s : 1.0;
  }
  return a;
}

/// Mean over components and samples of (scale * matched estimate - truth)^2.
inline double mse(const Matrix& S_hat, const Matrix& S_true, const Alignment& a) {
  detail::check_same_shape(S_hat, S_true, "mse");
  const Eigen::Index n = S_true.rows();
  if (a.permutation.size() != static_cast<std::size_t>(n) || a.scales.size() != a.permutation.size())
    throw std::invalid_argument("mse: alignment does not match the number of sources");
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    total += (a.scales[k] * S_hat.row(static_cast<Eigen::Index>(a.permutation[k])) - S_true.row(i))
                 .squaredNorm();
  }
  return total / static_cast<double>(S_true.size());
}

inline double mse(const Matrix& S_hat, const Matrix& S_true) {
  return mse(S_hat, S_true, align(S_hat, S_true));
}

/// Fraction of positions where the two label vectors agree.
inline double upsilon(const std::vector<int>& labels_hat, const std::vector<int>& labels_true) {
  if (labels_hat.size() != labels_true.size())
    throw std::invalid_argument("upsilon: label vectors differ in length");
  if (labels_hat.empty()) throw std::invalid_argument("upsilon: empty label vectors");
  std::size_t hits = 0;
  for (std::size_t t = 0; t < labels_hat.size(); ++t) hits += labels_hat[t] == labels_true[t];
  return static_cast<double>(hits) / static_cast<double>(labels_hat.size());
}

/// Number of values dropped from each end by trimmed_mean.
inline std::size_t trim_count(std::size_t count, double trim_frac) {
  return static_cast<std::size_t>(std::floor(trim_frac * static_cast<double>(count)));
}

/// Mean after sorting and discarding floor(trim_frac * N) values at each end.
inline double trimmed_mean(std::vector<double> values, double trim_frac = 0.01) {
  if (values.empty()) throw std::invalid_argument("trimmed_mean: no values");
  if (!(trim_frac >= 0.0 && trim_frac < 0.5))
    throw std::invalid_argument("trimmed_mean: trim fraction must lie in [0, 0.5)");
  std::sort(values.begin(), values.end());
  const std::size_t k = trim_count(values.size(), trim_frac);
  const auto first = values.begin() + static_cast<std::ptrdiff_t>(k);
  const auto last = values.end() - static_cast<std::ptrdiff_t>(k);
  return std::accumulate(first, last, 0.0) / static_cast<double>(last - first);
}

enum class Aggregate { Single, TrimmedMean };

struct EvaluationReport {
  double mse = 0.0;
  double upsilon = 0.0;
  std::size_t trials = 1;
  Aggregate aggregate = Aggregate::Single;
};

}  // namespace cbss
