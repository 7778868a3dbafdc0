#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cbss/christoffel.hpp"
#include "cbss/polybasis.hpp"

namespace cbss::io {

using json = nlohmann::json;

/// Parse failure carrying the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_number(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

/// Reads a CSV whose rows are samples and whose columns are variables. A
/// first line containing any non-numeric field is taken as a header. Returns
/// the data transposed to n x T (one column per sample).
inline Matrix parse_matrix_csv(std::istream& in, const std::string& name = "<input>") {
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, lineno = 0;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (!detail::parse_number(fields[i], row[i])) numeric = false;
    if (!numeric) {
      if (first) {
        first = false;
        cols = fields.size();
        continue;
      }
      for (std::size_t i = 0; i < fields.size(); ++i)
        if (!detail::parse_number(fields[i], row[i]))
          throw ParseError(name, lineno, "field " + std::to_string(i + 1) + " ('" +
                                             std::string(fields[i]) + "') is not a number");
    }
    first = false;
    if (cols == 0) cols = fields.size();
    if (fields.size() != cols)
      throw ParseError(name, lineno, "expected " + std::to_string(cols) + " fields, found " +
                                         std::to_string(fields.size()));
    for (double v : row)
      if (!std::isfinite(v)) throw ParseError(name, lineno, "non-finite value");
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw ParseError(name, lineno, "no data rows");
  Matrix X(static_cast<Eigen::Index>(cols), static_cast<Eigen::Index>(rows));
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t i = 0; i < cols; ++i)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = values[t * cols + i];
  return X;
}

inline Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_matrix_csv(in, path);
}

/// Writes an n x T matrix as T rows of n columns with header x1..xn.
inline void write_matrix_csv(std::ostream& out, const Matrix& X, const std::string& prefix = "x") {
  for (Eigen::Index i = 0; i < X.rows(); ++i) out << (i ? "," : "") << prefix << i + 1;
  out << '\n';
  for (Eigen::Index t = 0; t < X.cols(); ++t) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) out << (i ? "," : "") << format_double(X(i, t));
    out << '\n';
  }
}

inline void write_matrix_csv(const std::string& path, const Matrix& X, const std::string& prefix = "x") {
  auto out = detail::open_out(path);
  write_matrix_csv(out, X, prefix);
}

inline std::vector<int> read_labels_csv(const std::string& path) {
  const Matrix L = read_matrix_csv(path);
  if (L.rows() != 1) throw std::runtime_error(path + ": labels file must have one column");
  std::vector<int> labels(static_cast<std::size_t>(L.cols()));
  for (Eigen::Index t = 0; t < L.cols(); ++t) {
    const double v = L(0, t);
    if (v != 0.0 && v != 1.0)
      throw std::runtime_error(path + ": label " + std::to_string(t + 1) + " is not 0 or 1");
    labels[static_cast<std::size_t>(t)] = static_cast<int>(v);
  }
  return labels;
}

inline void write_labels_csv(const std::string& path, const std::vector<int>& labels) {
  auto out = detail::open_out(path);
  out << "label\n";
  for (int r : labels) out << r << '\n';
}

/// {"rows": r, "cols": c, "n": r, "data": [row-major]}
inline json matrix_json(const Matrix& M) {
  json data = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) data.push_back(M(i, j));
  return {{"n", M.rows()}, {"rows", M.rows()}, {"cols", M.cols()}, {"data", data}};
}

inline Matrix matrix_from_json(const json& j) {
  const auto rows = j.contains("rows") ? j.at("rows").get<Eigen::Index>() : j.at("n").get<Eigen::Index>();
  const auto cols = j.contains("cols") ? j.at("cols").get<Eigen::Index>() : rows;
  const auto& data = j.at("data");
  if (data.size() != static_cast<std::size_t>(rows * cols))
    throw std::runtime_error("matrix json: expected " + std::to_string(rows * cols) + " entries");
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = data[static_cast<std::size_t>(i * cols + k)].get<double>();
  return M;
}

/// Basis as an array of exponent arrays, in basis order.
inline json basis_json(const MonomialBasis& b) {
  json arr = json::array();
  for (const auto& alpha : b.indices()) arr.push_back(alpha);
  return arr;
}

inline json write_json(const std::string& path, const json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
  return j;
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

/// Scores as CSV with columns t (1-based), theta, label.
inline void write_scores_csv(std::ostream& out, const ScoreReport& r) {
  out << "t,theta,label\n";
  for (std::size_t t = 0; t < r.theta.size(); ++t)
    out << t + 1 << ',' << format_double(r.theta[t]) << ',' << r.labels[t] << '\n';
}

inline json score_sidecar(const ScoreReport& r) {
  return {{"n", r.dimension},
          {"d", r.degree},
          {"eta", r.eta_used},
          {"threshold", r.threshold},
          {"threshold_weight", to_string(r.weight)},
          {"m", r.basis_size},
          {"condition_warning", r.condition_warning},
          {"truncated_directions", r.truncated},
          {"undersampled", r.undersampled}};
}

/// Writes <dir>/scores.csv and <dir>/scores.json.
inline void write_score_report(const std::string& dir, const ScoreReport& r) {
  auto out = detail::open_out(dir + "/scores.csv");
  write_scores_csv(out, r);
  write_json(dir + "/scores.json", score_sidecar(r));
}

}  // namespace cbss::io
