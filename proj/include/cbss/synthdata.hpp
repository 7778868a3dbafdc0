#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbss/polybasis.hpp"

namespace cbss {

/// splitmix64 finaliser; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for child stream `index` of `seed`; independent of evaluation order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix_seed(mix_seed(seed) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

/// i.i.d. uniform entries on [-sqrt 3, sqrt 3]: centred, unit variance.
inline Matrix gen_p0(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("gen_p0: dimension must be >= 1");
  std::mt19937_64 rng(seed);
  const double b = std::sqrt(3.0);
  std::uniform_real_distribution<double> u(-b, b);
  Matrix S(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(count));
  for (Eigen::Index t = 0; t < S.cols(); ++t)
    for (Eigen::Index i = 0; i < S.rows(); ++i) S(i, t) = u(rng);
  return S;
}

/// Points on the cubic s3 = s1^3 / beta^2 with s1 ~ U[-beta, beta] and
/// s2 ~ U[-gamma, gamma] (s2 = 0 when gamma = 0).
inline Matrix gen_p1_cubic(std::size_t count, double beta, double gamma, std::uint64_t seed) {
  if (!(beta > 0)) throw std::invalid_argument("gen_p1_cubic: beta must be > 0");
  if (!(gamma >= 0)) throw std::invalid_argument("gen_p1_cubic: gamma must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix S(3, static_cast<Eigen::Index>(count));
  for (Eigen::Index t = 0; t < S.cols(); ++t) {
    const double s1 = beta * u(rng);
    const double s2 = gamma * u(rng);
    S(0, t) = s1;
    S(1, t) = s2;
    S(2, t) = s1 * s1 * s1 / (beta * beta);
  }
  return S;
}

/// Five sources: three centred unit-variance uniforms and two rows held at
/// zero (rows 3 and 4, zero-based, unless `zero_rows` says otherwise).
inline Matrix gen_p1_vanishing(std::size_t count, std::uint64_t seed,
                               std::pair<std::size_t, std::size_t> zero_rows = {3, 4}) {
  if (zero_rows.first == zero_rows.second || zero_rows.first >= 5 || zero_rows.second >= 5)
    throw std::invalid_argument("gen_p1_vanishing: need two distinct indices in [0, 5)");
  const Matrix U = gen_p0(3, count, seed);
  Matrix S = Matrix::Zero(5, static_cast<Eigen::Index>(count));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < 5; ++i) {
    if (static_cast<std::size_t>(i) == zero_rows.first ||
        static_cast<std::size_t>(i) == zero_rows.second)
      continue;
    S.row(i) = U.row(k++);
  }
  return S;
}

/// Column generator for a user-supplied singular component: returns an
/// n x count matrix for the given seed.
using P1Generator = std::function<Matrix(std::size_t count, std::uint64_t seed)>;

enum class P1Kind { CubicCurve3D, VanishingPair5D, Pluggable };

inline std::string to_string(P1Kind k) {
  switch (k) {
    case P1Kind::CubicCurve3D: return "cubic";
    case P1Kind::VanishingPair5D: return "vanishing";
    case P1Kind::Pluggable: return "pluggable";
  }
  return "unknown";
}

inline P1Kind parse_p1_kind(const std::string& s) {
  if (s == "cubic") return P1Kind::CubicCurve3D;
  if (s == "vanishing") return P1Kind::VanishingPair5D;
  if (s == "pluggable") return P1Kind::Pluggable;
  throw std::invalid_argument("unknown generator kind '" + s + "' (expected cubic or vanishing)");
}

struct MixtureSpec {
  std::size_t n = 5;
  double eta = 0.5;  // P(r = 0)
  P1Kind kind = P1Kind::VanishingPair5D;
  double beta = 1.5;
  double gamma = 0.0;
  std::pair<std::size_t, std::size_t> vanish_indices{3, 4};
  P1Generator custom;

  void validate() const {
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("mixture: eta must lie in [0, 1]");
    if (n == 0) throw std::invalid_argument("mixture: dimension must be >= 1");
    switch (kind) {
      case P1Kind::CubicCurve3D:
        if (n != 3) throw std::invalid_argument("mixture: cubic generator needs n = 3");
        if (!(beta > 0) || !(gamma >= 0))
          throw std::invalid_argument("mixture: cubic generator needs beta > 0, gamma >= 0");
        break;
      case P1Kind::VanishingPair5D:
        if (n != 5) throw std::invalid_argument("mixture: vanishing generator needs n = 5");
        if (vanish_indices.first == vanish_indices.second || vanish_indices.first >= 5 ||
            vanish_indices.second >= 5)
          throw std::invalid_argument("mixture: vanishing generator needs two distinct indices");
        break;
      case P1Kind::Pluggable:
        if (!custom) throw std::invalid_argument("mixture: pluggable generator not set");
        break;
    }
  }

  Matrix draw_p1(std::size_t count, std::uint64_t seed) const {
    switch (kind) {
      case P1Kind::CubicCurve3D: return gen_p1_cubic(count, beta, gamma, seed);
      case P1Kind::VanishingPair5D: return gen_p1_vanishing(count, seed, vanish_indices);
      case P1Kind::Pluggable: {
        Matrix S = custom(count, seed);
        if (static_cast<std::size_t>(S.rows()) != n || static_cast<std::size_t>(S.cols()) != count)
          throw std::runtime_error("mixture: pluggable generator returned wrong shape");
        return S;
      }
    }
    throw std::logic_error("mixture: unknown kind");
  }
};

struct GeneratedData {
  Matrix S;                // n x T sources
  std::vector<int> labels; // true r_t
  Matrix A;                // n x n mixing
  Matrix X;                // A * S
};

/// n x n matrix with i.i.d. N(0, 1) entries, redrawn until its 2-norm
/// condition number is at most max_condition.
inline Matrix gen_mixing(std::size_t n, std::uint64_t seed, double max_condition = 1e6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const auto k = static_cast<Eigen::Index>(n);
  for (;;) {
    Matrix A(k, k);
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index i = 0; i < k; ++i) A(i, j) = g(rng);
    Eigen::JacobiSVD<Matrix> svd(A);
    const Vector& sv = svd.singularValues();
    if (sv[k - 1] > 0 && sv[0] / sv[k - 1] <= max_condition) return A;
  }
}

/// Draws labels i.i.d. with P(r = 0) = eta, sources from P0 or P1 per label,
/// a Gaussian mixing matrix, and X = A * S.
inline GeneratedData gen_mixture(const MixtureSpec& spec, std::size_t T, std::uint64_t seed) {
  spec.validate();
  GeneratedData g;
  g.labels.resize(T);
  {
    std::mt19937_64 rng(derive_seed(seed, 0));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& r : g.labels) r = u(rng) < spec.eta ? 0 : 1;
  }
  std::size_t count0 = 0;
  for (int r : g.labels) count0 += r == 0;
  const Matrix S0 = gen_p0(spec.n, count0, derive_seed(seed, 1));
  const Matrix S1 = spec.draw_p1(T - count0, derive_seed(seed, 2));

  g.S.resize(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(T));
  Eigen::Index i0 = 0, i1 = 0;
  for (std::size_t t = 0; t < T; ++t)
    g.S.col(static_cast<Eigen::Index>(t)) = g.labels[t] == 0 ? S0.col(i0++) : S1.col(i1++);

  g.A = gen_mixing(spec.n, derive_seed(seed, 3));
  g.X = g.A * g.S;
  return g;
}

}  // namespace cbss
