#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cbss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Per-variable exponents of one monomial.
using MultiIndex = std::vector<unsigned>;

inline unsigned total_degree(const MultiIndex& alpha) {
  return std::accumulate(alpha.begin(), alpha.end(), 0u);
}

/// Number of monomials of total degree <= d in n variables, C(n+d, n).
/// Throws std::overflow_error instead of wrapping.
inline std::uint64_t basis_size(std::size_t n, unsigned d) {
  if (n == 0) throw std::invalid_argument("basis_size: dimension must be >= 1");
  // C(n+k, k) = C(n+k-1, k-1) * (n+k) / k, kept exact by cancelling gcd first.
  std::uint64_t r = 1;
  for (std::uint64_t k = 1; k <= d; ++k) {
    std::uint64_t num = static_cast<std::uint64_t>(n) + k;
    if (num < k) throw std::overflow_error("basis_size: overflow");
    std::uint64_t g = std::gcd(r, k);
    std::uint64_t rr = r / g;
    std::uint64_t kk = k / g;
    std::uint64_t q = num / kk;  // kk divides num since gcd(rr, kk) == 1
    if (rr > std::numeric_limits<std::uint64_t>::max() / q)
      throw std::overflow_error("basis_size: C(" + std::to_string(n + d) + ", " +
                                std::to_string(n) + ") does not fit in 64 bits");
    r = rr * q;
  }
  return r;
}

/// Monomials of total degree <= d in n variables, in graded lexicographic order:
/// ascending total degree, and within a degree x1^2 < x1*x2 < x2^2 (exponent
/// vectors in descending lexicographic order). The first entry is the constant.
class MonomialBasis {
 public:
  MonomialBasis(std::size_t n, unsigned d) : n_(n), d_(d) {
    if (n == 0) throw std::invalid_argument("MonomialBasis: dimension must be >= 1");
    const std::uint64_t m = basis_size(n, d);
    if (m > std::numeric_limits<std::size_t>::max() / 2)
      throw std::overflow_error("MonomialBasis: basis too large");
    indices_.reserve(static_cast<std::size_t>(m));
    MultiIndex current(n, 0);
    for (unsigned k = 0; k <= d; ++k) fill_degree(current, 0, k);

    std::map<MultiIndex, std::size_t> position;
    for (std::size_t k = 0; k < indices_.size(); ++k) position.emplace(indices_[k], k);
    parent_.assign(indices_.size(), 0);
    variable_.assign(indices_.size(), 0);
    for (std::size_t k = 1; k < indices_.size(); ++k) {
      MultiIndex lower = indices_[k];
      std::size_t i = 0;
      while (lower[i] == 0) ++i;
      --lower[i];
      parent_[k] = position.at(lower);
      variable_[k] = i;
    }
  }

  std::size_t dimension() const { return n_; }
  unsigned degree() const { return d_; }
  std::size_t size() const { return indices_.size(); }
  const MultiIndex& operator[](std::size_t k) const { return indices_[k]; }
  const std::vector<MultiIndex>& indices() const { return indices_; }

  /// Position of alpha in the basis, or size() if absent.
  std::size_t find(const MultiIndex& alpha) const {
    for (std::size_t k = 0; k < indices_.size(); ++k)
      if (indices_[k] == alpha) return k;
    return indices_.size();
  }

  /// Evaluates every monomial at x. Each entry is one multiplication away from
  /// an earlier entry, so the cost is O(size()).
  Vector embed(std::span<const double> x) const {
    if (x.size() != n_)
      throw std::invalid_argument("embed: point has " + std::to_string(x.size()) +
                                  " coordinates, basis expects " + std::to_string(n_));
    Vector v(static_cast<Eigen::Index>(size()));
    v[0] = 1.0;
    for (std::size_t k = 1; k < size(); ++k)
      v[static_cast<Eigen::Index>(k)] =
          v[static_cast<Eigen::Index>(parent_[k])] * x[variable_[k]];
    return v;
  }

  Vector embed(const Vector& x) const { return embed(std::span<const double>(x.data(), x.size())); }

  /// Embeds every column of an n x T matrix, giving size() x T.
  Matrix embed_columns(const Matrix& X) const {
    if (static_cast<std::size_t>(X.rows()) != n_)
      throw std::invalid_argument("embed_columns: data has " + std::to_string(X.rows()) +
                                  " rows, basis expects " + std::to_string(n_));
    const auto m = static_cast<Eigen::Index>(size());
    Matrix V(m, X.cols());
    V.row(0).setOnes();
    for (Eigen::Index k = 1; k < m; ++k)
      V.row(k) = V.row(static_cast<Eigen::Index>(parent_[k])).cwiseProduct(
          X.row(static_cast<Eigen::Index>(variable_[k])));
    return V;
  }

 private:
  void fill_degree(MultiIndex& current, std::size_t var, unsigned remaining) {
    if (var + 1 == n_) {
      current[var] = remaining;
      indices_.push_back(current);
      current[var] = 0;
      return;
    }
    for (unsigned e = remaining + 1; e-- > 0;) {
      current[var] = e;
      fill_degree(current, var + 1, remaining - e);
    }
    current[var] = 0;
  }

  std::size_t n_;
  unsigned d_;
  std::vector<MultiIndex> indices_;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> variable_;
};

/// Human-readable monomial, e.g. "x1^2*x3" or "1".
inline std::string monomial_string(const MultiIndex& alpha) {
  std::string out;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] == 0) continue;
    if (!out.empty()) out += '*';
    out += 'x' + std::to_string(i + 1);
    if (alpha[i] > 1) out += '^' + std::to_string(alpha[i]);
  }
  return out.empty() ? "1" : out;
}

}  // namespace cbss
