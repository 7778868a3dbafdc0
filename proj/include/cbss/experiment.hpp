#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cbss/christoffel.hpp"
#include "cbss/evalmetrics.hpp"
#include "cbss/ica.hpp"
#include "cbss/io.hpp"
#include "cbss/synthdata.hpp"

namespace cbss {

enum class Method { IgnoreP1, Proposed, KnownR };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::IgnoreP1: return "ignore_p1";
    case Method::Proposed: return "proposed";
    case Method::KnownR: return "known_r";
  }
  return "unknown";
}

inline Method parse_method(const std::string& s) {
  if (s == "ignore_p1") return Method::IgnoreP1;
  if (s == "proposed") return Method::Proposed;
  if (s == "known_r") return Method::KnownR;
  throw std::invalid_argument("unknown method '" + s + "' (expected ignore_p1, proposed, known_r)");
}

struct ExperimentConfig {
  MixtureSpec generator;  // generator.eta is replaced by each grid value
  std::size_t T = 2000;
  std::vector<unsigned> degrees{6};
  std::vector<double> etas{0.2, 0.4, 0.6, 0.8};
  std::size_t trials = 200;
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::IgnoreP1, Method::Proposed, Method::KnownR};
  std::string output_dir = "results";
  double trim = 0.01;
  ThresholdWeight threshold_weight = ThresholdWeight::P0;
  bool record_timing = true;

  void validate() const {
    if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    if (T < 1) throw std::invalid_argument("config: T must be >= 1");
    if (etas.empty()) throw std::invalid_argument("config: eta list is empty");
    for (double e : etas)
      if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("config: every eta must lie in [0, 1]");
    if (methods.empty()) throw std::invalid_argument("config: method list is empty");
    if (std::find(methods.begin(), methods.end(), Method::Proposed) != methods.end() && degrees.empty())
      throw std::invalid_argument("config: proposed method needs at least one degree");
    if (!(trim >= 0.0 && trim < 0.5)) throw std::invalid_argument("config: trim must lie in [0, 0.5)");
    MixtureSpec probe = generator;
    probe.eta = etas.front();
    probe.validate();
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json gen = {{"kind", to_string(c.generator.kind)}, {"n", c.generator.n}};
  if (c.generator.kind == P1Kind::CubicCurve3D) {
    gen["beta"] = c.generator.beta;
    gen["gamma"] = c.generator.gamma;
  } else if (c.generator.kind == P1Kind::VanishingPair5D) {
    gen["vanish_indices"] = {c.generator.vanish_indices.first, c.generator.vanish_indices.second};
  }
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.push_back(to_string(m));
  return {{"generator", gen},
          {"T", c.T},
          {"degrees", c.degrees},
          {"etas", c.etas},
          {"trials", c.trials},
          {"seed", c.seed},
          {"methods", methods},
          {"output_dir", c.output_dir},
          {"trim", c.trim},
          {"threshold_weight", to_string(c.threshold_weight)},
          {"record_timing", c.record_timing}};
}

/// Fields missing from `j` keep their defaults.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("generator")) {
      const auto& g = j.at("generator");
      c.generator.kind = parse_p1_kind(g.value("kind", std::string("vanishing")));
      c.generator.n = g.value("n", c.generator.kind == P1Kind::CubicCurve3D ? std::size_t{3} : std::size_t{5});
      c.generator.beta = g.value("beta", c.generator.beta);
      c.generator.gamma = g.value("gamma", c.generator.gamma);
      if (g.contains("vanish_indices")) {
        const auto v = g.at("vanish_indices").get<std::vector<std::size_t>>();
        if (v.size() != 2) throw std::invalid_argument("config: vanish_indices needs two entries");
        c.generator.vanish_indices = {v[0], v[1]};
      }
    }
    c.T = j.value("T", c.T);
    c.degrees = j.value("degrees", c.degrees);
    c.etas = j.value("etas", c.etas);
    c.trials = j.value("trials", c.trials);
    c.seed = j.value("seed", c.seed);
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.trim = j.value("trim", c.trim);
    if (j.contains("threshold_weight"))
      c.threshold_weight = parse_threshold_weight(j.at("threshold_weight").get<std::string>());
    c.record_timing = j.value("record_timing", c.record_timing);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

struct TrialRecord {
  Method method = Method::Proposed;
  double eta = 0.0;
  unsigned degree = 0;  // meaningful for Method::Proposed only
  std::size_t trial = 0;
  bool ok = false;
  double mse = 0.0;
  double upsilon = 0.0;
  double runtime_ms = 0.0;   // classification + unmixing
  double classify_ms = 0.0;  // classification step alone
  bool converged = false;
  bool condition_warning = false;
  std::string error;
};

struct CellSummary {
  Method method = Method::Proposed;
  double eta = 0.0;
  unsigned degree = 0;
  std::size_t trials_ok = 0;
  std::size_t trials_kept = 0;
  std::size_t failures = 0;
  std::size_t condition_warnings = 0;
  double mse_trimmed = std::numeric_limits<double>::quiet_NaN();
  double upsilon_trimmed = std::numeric_limits<double>::quiet_NaN();
  double mse_stderr = std::numeric_limits<double>::quiet_NaN();
  double runtime_ms_mean = std::numeric_limits<double>::quiet_NaN();
  double classify_ms_mean = std::numeric_limits<double>::quiet_NaN();
  std::string first_error;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<CellSummary> cells;
  std::vector<TrialRecord> trials;

  const CellSummary& cell(Method m, double eta, unsigned degree = 0) const {
    for (const auto& c : cells)
      if (c.method == m && c.eta == eta && (m != Method::Proposed || c.degree == degree)) return c;
    throw std::out_of_range("experiment report: no cell " + to_string(m) + " eta=" +
                            io::format_double(eta) + " d=" + std::to_string(degree));
  }
};

/// Seed of the data drawn for (eta index, trial); shared by every method so
/// comparisons within a trial are paired.
inline std::uint64_t trial_seed(std::uint64_t seed, std::size_t eta_index, std::size_t trial) {
  return derive_seed(derive_seed(seed, eta_index), trial);
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

inline std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, std::size_t eta_index,
                                          std::size_t trial) {
  const double eta = cfg.etas[eta_index];
  MixtureSpec spec = cfg.generator;
  spec.eta = eta;
  const std::uint64_t data_seed = trial_seed(cfg.seed, eta_index, trial);
  const GeneratedData g = gen_mixture(spec, cfg.T, data_seed);
  const std::uint64_t ica_seed = derive_seed(data_seed, 17);

  std::vector<TrialRecord> out;
  auto record = [&](Method m, unsigned d, auto&& body) {
    TrialRecord r;
    r.method = m;
    r.eta = eta;
    r.degree = d;
    r.trial = trial;
    try {
      const auto t0 = Clock::now();
      SeparationResult s = body(r);
      r.runtime_ms = elapsed_ms(t0);
      r.mse = mse(s.S_hat, g.S);
      r.upsilon = upsilon(s.report.labels, g.labels);
      r.converged = s.unmixing.converged;
      r.condition_warning = s.report.condition_warning;
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    out.push_back(std::move(r));
  };

  for (Method m : cfg.methods) {
    switch (m) {
      case Method::IgnoreP1:
        record(m, 0, [&](TrialRecord&) { return separate_unclassified(g.X, ica_seed); });
        break;
      case Method::KnownR:
        record(m, 0, [&](TrialRecord&) { return separate_supervised(g.X, g.labels, ica_seed); });
        break;
      case Method::Proposed:
        for (unsigned d : cfg.degrees) {
          record(m, d, [&](TrialRecord& r) {
            ClassifyOptions opt;
            opt.weight = cfg.threshold_weight;
            const auto t0 = Clock::now();
            ScoreReport rep = classify(g.X, d, eta, opt);
            r.classify_ms = elapsed_ms(t0);
            return separate_with_labels(g.X, std::move(rep), ica_seed);
          });
        }
        break;
    }
  }
  return out;
}

inline CellSummary summarize(const std::vector<const TrialRecord*>& rs, double trim) {
  CellSummary c;
  c.method = rs.front()->method;
  c.eta = rs.front()->eta;
  c.degree = rs.front()->degree;
  std::vector<double> mses, ups;
  double runtime = 0.0, classify_ms = 0.0;
  for (const TrialRecord* r : rs) {
    if (!r->ok) {
      ++c.failures;
      if (c.first_error.empty()) c.first_error = r->error;
      continue;
    }
    mses.push_back(r->mse);
    ups.push_back(r->upsilon);
    runtime += r->runtime_ms;
    classify_ms += r->classify_ms;
    c.condition_warnings += r->condition_warning;
  }
  c.trials_ok = mses.size();
  if (mses.empty()) return c;
  c.trials_kept = mses.size() - 2 * trim_count(mses.size(), trim);
  c.mse_trimmed = trimmed_mean(mses, trim);
  c.upsilon_trimmed = trimmed_mean(ups, trim);
  c.runtime_ms_mean = runtime / static_cast<double>(mses.size());
  c.classify_ms_mean = classify_ms / static_cast<double>(mses.size());
  if (mses.size() > 1) {
    double mean = 0.0, ss = 0.0;
    for (double v : mses) mean += v;
    mean /= static_cast<double>(mses.size());
    for (double v : mses) ss += (v - mean) * (v - mean);
    c.mse_stderr = std::sqrt(ss / static_cast<double>(mses.size() - 1) / static_cast<double>(mses.size()));
  }
  return c;
}

}  // namespace detail

/// Number of worker threads from CBSS_THREADS, else the hardware count.
inline unsigned default_threads() {
  if (const char* env = std::getenv("CBSS_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs every (eta, trial) unit of the grid, all methods per unit, on a pool
/// of `threads` workers. Records are merged in grid order, so the report does
/// not depend on scheduling.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, unsigned threads = default_threads()) {
  cfg.validate();
  const std::size_t units = cfg.etas.size() * cfg.trials;
  std::vector<std::vector<TrialRecord>> slots(units);
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t u = next.fetch_add(1);
      if (u >= units) return;
      try {
        slots[u] = detail::run_trial(cfg, u / cfg.trials, u % cfg.trials);
      } catch (...) {
        std::lock_guard<std::mutex> lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };
  const unsigned nthreads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(units)));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  ExperimentReport rep;
  rep.config = cfg;
  for (auto& s : slots)
    for (auto& r : s) rep.trials.push_back(std::move(r));

  for (std::size_t e = 0; e < cfg.etas.size(); ++e) {
    for (Method m : cfg.methods) {
      const std::vector<unsigned> ds =
          m == Method::Proposed ? cfg.degrees : std::vector<unsigned>{0};
      for (unsigned d : ds) {
        std::vector<const TrialRecord*> rs;
        for (const auto& r : rep.trials)
          if (r.method == m && r.eta == cfg.etas[e] && r.degree == d) rs.push_back(&r);
        rep.cells.push_back(detail::summarize(rs, cfg.trim));
      }
    }
  }
  return rep;
}

inline std::string format_metric(double v) { return std::isnan(v) ? "nan" : io::format_double(v); }

/// One row per (method, eta, d) cell. d is "-" for methods without a degree;
/// runtime is "NA" when timing is disabled, which keeps the file reproducible
/// byte for byte.
inline void write_report_csv(std::ostream& out, const ExperimentReport& rep) {
  out << "method,eta,d,trials_kept,mse_trimmed,upsilon_trimmed,runtime_ms_mean\n";
  for (const auto& c : rep.cells) {
    out << to_string(c.method) << ',' << io::format_double(c.eta) << ','
        << (c.method == Method::Proposed ? std::to_string(c.degree) : std::string("-")) << ','
        << c.trials_kept << ',' << format_metric(c.mse_trimmed) << ','
        << format_metric(c.upsilon_trimmed) << ','
        << (rep.config.record_timing ? format_metric(c.runtime_ms_mean) : std::string("NA")) << '\n';
  }
}

/// Long-format per-trial records for external plotting.
inline void write_trials_csv(std::ostream& out, const ExperimentReport& rep) {
  out << "method,eta,d,trial,ok,mse,upsilon,converged,condition_warning\n";
  for (const auto& r : rep.trials) {
    out << to_string(r.method) << ',' << io::format_double(r.eta) << ','
        << (r.method == Method::Proposed ? std::to_string(r.degree) : std::string("-")) << ','
        << r.trial << ',' << r.ok << ',' << (r.ok ? io::format_double(r.mse) : "nan") << ','
        << (r.ok ? io::format_double(r.upsilon) : "nan") << ',' << r.converged << ','
        << r.condition_warning << '\n';
  }
}

/// Markdown MSE table: one row per method (and degree), one column per eta.
inline std::string report_markdown(const ExperimentReport& rep) {
  const auto& cfg = rep.config;
  std::ostringstream md;
  char buf[64];
  md << "| Method |";
  for (double e : cfg.etas) md << " eta=" << io::format_double(e) << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < cfg.etas.size(); ++i) md << "---|";
  md << '\n';
  auto row = [&](const std::string& label, Method m, unsigned d) {
    md << "| " << label << " |";
    for (double e : cfg.etas) {
      const CellSummary& c = rep.cell(m, e, d);
      if (c.trials_ok == 0) {
        md << " failed |";
      } else {
        std::snprintf(buf, sizeof buf, " %.4f |", c.mse_trimmed);
        md << buf;
      }
    }
    md << '\n';
  };
  for (Method m : cfg.methods) {
    if (m == Method::IgnoreP1) row("Ignore P1", m, 0);
    if (m == Method::Proposed)
      for (unsigned d : cfg.degrees) row("Proposed (order d=" + std::to_string(d) + ")", m, d);
    if (m == Method::KnownR) row("Known r", m, 0);
  }
  md << "\nTrimmed-mean MSE over " << cfg.trials << " trials (T=" << cfg.T << ", trim "
     << io::format_double(cfg.trim) << " per side).\n";

  if (cfg.record_timing) {
    md << "\n| Method | eta | pipeline ms | classification ms |\n|---|---|---|---|\n";
    for (const auto& c : rep.cells) {
      std::snprintf(buf, sizeof buf, "%.2f | %.2f", c.runtime_ms_mean, c.classify_ms_mean);
      md << "| " << to_string(c.method)
         << (c.method == Method::Proposed ? " d=" + std::to_string(c.degree) : std::string()) << " | "
         << io::format_double(c.eta) << " | " << buf << " |\n";
    }
  }
  bool header = false;
  for (const auto& c : rep.cells) {
    if (c.failures == 0 && c.condition_warnings == 0) continue;
    if (!header) {
      md << "\nIssues:\n\n";
      header = true;
    }
    md << "- " << to_string(c.method) << " eta=" << io::format_double(c.eta);
    if (c.method == Method::Proposed) md << " d=" << c.degree;
    md << ": " << c.failures << " failed";
    if (!c.first_error.empty()) md << " (" << c.first_error << ")";
    md << ", " << c.condition_warnings << " with truncated moment solve\n";
  }
  return md.str();
}

/// Writes report.csv, report.md, trials.csv and manifest.json into `dir`.
inline void write_experiment(const std::string& dir, const ExperimentReport& rep,
                             const std::string& version) {
  {
    auto out = io::detail::open_out(dir + "/report.csv");
    write_report_csv(out, rep);
  }
  {
    auto out = io::detail::open_out(dir + "/report.md");
    out << report_markdown(rep);
  }
  {
    auto out = io::detail::open_out(dir + "/trials.csv");
    write_trials_csv(out, rep);
  }
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : rep.cells) {
    nlohmann::json jc = {{"method", to_string(c.method)},
                         {"eta", c.eta},
                         {"trials_ok", c.trials_ok},
                         {"trials_kept", c.trials_kept},
                         {"failures", c.failures},
                         {"condition_warnings", c.condition_warnings}};
    if (c.method == Method::Proposed) jc["d"] = c.degree;
    if (!c.first_error.empty()) jc["first_error"] = c.first_error;
    if (rep.config.record_timing) {
      jc["runtime_ms_mean"] = c.runtime_ms_mean;
      jc["classify_ms_mean"] = c.classify_ms_mean;
    }
    cells.push_back(jc);
  }
  io::write_json(dir + "/manifest.json",
                 {{"config", to_json(rep.config)}, {"version", version}, {"cells", cells}});
}

}  // namespace cbss
