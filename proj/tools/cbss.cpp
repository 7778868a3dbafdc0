// Command-line front end: basis, generate, classify, separate, experiment.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cbss/cbss.hpp"

namespace fs = std::filesystem;

namespace {

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

void warn_about(const cbss::ScoreReport& r, std::size_t T) {
  if (r.undersampled)
    std::cerr << "warning: T=" << T << " samples <= basis size m=" << r.basis_size
              << "; the moment matrix cannot be full rank\n";
  if (r.condition_warning)
    std::cerr << "warning: ill-conditioned moment matrix, " << r.truncated
              << " eigen-directions truncated\n";
}

void print_summary(const cbss::ScoreReport& r, const std::vector<int>* truth) {
  std::cout << "n=" << r.dimension << " d=" << r.degree << " m=" << r.basis_size
            << " eta=" << cbss::io::format_double(r.eta_used)
            << " threshold=" << cbss::io::format_double(r.threshold) << '\n'
            << "label0=" << r.count(0) << " label1=" << r.count(1) << '\n';
  if (truth) std::cout << "upsilon=" << cbss::io::format_double(cbss::upsilon(r.labels, *truth)) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Christoffel-function sample selection for blind source separation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cbss::version);

  // basis
  auto* basis = app.add_subcommand("basis", "Print the graded-lex monomial basis");
  std::size_t basis_n = 0;
  unsigned basis_d = 0;
  bool basis_json = false;
  basis->add_option("-n", basis_n, "Number of variables")->required()->check(CLI::PositiveNumber);
  basis->add_option("-d", basis_d, "Maximum total degree")->required();
  basis->add_flag("--json", basis_json, "Print the basis as a JSON array of exponent arrays");

  // generate
  auto* gen = app.add_subcommand("generate", "Draw a synthetic mixture and write it to disk");
  std::string gen_kind = "vanishing";
  std::size_t gen_T = 2000;
  double gen_eta = 0.5, gen_beta = 1.5, gen_gamma = 0.0;
  std::uint64_t gen_seed = 1;
  std::string gen_out = ".";
  gen->add_option("--kind", gen_kind, "Singular component: vanishing (n=5) or cubic (n=3)")
      ->check(CLI::IsMember({"vanishing", "cubic"}));
  gen->add_option("-T", gen_T, "Number of samples")->check(CLI::PositiveNumber);
  gen->add_option("--eta", gen_eta, "P(r = 0)")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--beta", gen_beta, "Cubic generator: s1 range");
  gen->add_option("--gamma", gen_gamma, "Cubic generator: s2 range");
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--out", gen_out, "Output directory");

  // classify
  auto* cls = app.add_subcommand("classify", "Score samples and label them against the threshold");
  std::string cls_input, cls_labels, cls_out = ".", cls_weight = "p0";
  unsigned cls_d = 6;
  double cls_eta = 0.5;
  std::size_t cls_cap = 5000;
  cls->add_option("input", cls_input, "CSV of samples (rows) by variables (columns)")->required();
  cls->add_option("-d", cls_d, "Polynomial degree");
  cls->add_option("--eta", cls_eta, "Mixture weight of the regular component")->check(CLI::Range(0.0, 1.0));
  cls->add_option("--threshold-weight", cls_weight, "p0: eta*m (default), p1: (1-eta)*m")
      ->check(CLI::IsMember({"p0", "p1"}));
  cls->add_option("--labels", cls_labels, "True labels CSV; prints upsilon");
  cls->add_option("--out", cls_out, "Output directory for scores.csv and scores.json");
  cls->add_option("--cap", cls_cap, "Largest basis size accepted");

  // separate
  auto* sep = app.add_subcommand("separate", "Classify, then unmix the retained samples");
  std::string sep_input, sep_out = ".", sep_truth, sep_weight = "p0";
  unsigned sep_d = 6;
  double sep_eta = 0.5;
  std::uint64_t sep_seed = 1;
  sep->add_option("input", sep_input, "CSV of samples (rows) by variables (columns)")->required();
  sep->add_option("-d", sep_d, "Polynomial degree");
  sep->add_option("--eta", sep_eta, "Mixture weight of the regular component")->check(CLI::Range(0.0, 1.0));
  sep->add_option("--threshold-weight", sep_weight, "p0: eta*m (default), p1: (1-eta)*m")
      ->check(CLI::IsMember({"p0", "p1"}));
  sep->add_option("--seed", sep_seed, "Seed for the ICA restart");
  sep->add_option("--truth", sep_truth, "True sources CSV; prints the aligned MSE");
  sep->add_option("--out", sep_out, "Output directory");

  // experiment
  auto* exp = app.add_subcommand("experiment", "Run a Monte Carlo grid from a JSON config");
  std::string exp_config, exp_out;
  std::size_t exp_trials = 0;
  std::uint64_t exp_seed = 0;
  bool exp_seed_set = false;
  exp->add_option("--config", exp_config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  exp->add_option("--trials", exp_trials, "Override the trial count");
  auto* seed_opt = exp->add_option("--seed", exp_seed, "Override the seed");
  exp->add_option("--out", exp_out, "Override the output directory");

  CLI11_PARSE(app, argc, argv);
  exp_seed_set = seed_opt->count() > 0;

  try {
    if (*basis) {
      const cbss::MonomialBasis b(basis_n, basis_d);
      if (basis_json) {
        std::cout << cbss::io::basis_json(b).dump() << '\n';
      } else {
        for (const auto& alpha : b.indices()) std::cout << cbss::monomial_string(alpha) << '\n';
      }
      std::cout << "size=" << b.size() << '\n';
      return 0;
    }

    if (*gen) {
      cbss::MixtureSpec spec;
      spec.kind = cbss::parse_p1_kind(gen_kind);
      spec.n = spec.kind == cbss::P1Kind::CubicCurve3D ? 3 : 5;
      spec.eta = gen_eta;
      spec.beta = gen_beta;
      spec.gamma = gen_gamma;
      const cbss::GeneratedData g = cbss::gen_mixture(spec, gen_T, gen_seed);
      ensure_dir(gen_out);
      cbss::io::write_matrix_csv(gen_out + "/S.csv", g.S, "s");
      cbss::io::write_matrix_csv(gen_out + "/X.csv", g.X, "x");
      cbss::io::write_labels_csv(gen_out + "/labels.csv", g.labels);
      cbss::io::write_json(gen_out + "/A.json", cbss::io::matrix_json(g.A));
      nlohmann::json manifest = {{"kind", gen_kind}, {"n", spec.n},     {"eta", gen_eta},
                                 {"T", gen_T},       {"seed", gen_seed}, {"version", cbss::version}};
      if (spec.kind == cbss::P1Kind::CubicCurve3D) {
        manifest["beta"] = gen_beta;
        manifest["gamma"] = gen_gamma;
      }
      cbss::io::write_json(gen_out + "/manifest.json", manifest);
      std::cout << "wrote T=" << gen_T << " samples (label0=" << std::count(g.labels.begin(), g.labels.end(), 0)
                << ") to " << gen_out << '\n';
      return 0;
    }

    if (*cls) {
      const cbss::Matrix X = cbss::io::read_matrix_csv(cls_input);
      cbss::ClassifyOptions opt;
      opt.moment.max_size = cls_cap;
      opt.weight = cbss::parse_threshold_weight(cls_weight);
      const cbss::ScoreReport r = cbss::classify(X, cls_d, cls_eta, opt);
      warn_about(r, static_cast<std::size_t>(X.cols()));
      ensure_dir(cls_out);
      cbss::io::write_score_report(cls_out, r);
      std::vector<int> truth;
      if (!cls_labels.empty()) truth = cbss::io::read_labels_csv(cls_labels);
      print_summary(r, cls_labels.empty() ? nullptr : &truth);
      return 0;
    }

    if (*sep) {
      const cbss::Matrix X = cbss::io::read_matrix_csv(sep_input);
      cbss::ClassifyOptions opt;
      opt.weight = cbss::parse_threshold_weight(sep_weight);
      cbss::ScoreReport rep = cbss::classify(X, sep_d, sep_eta, opt);
      warn_about(rep, static_cast<std::size_t>(X.cols()));
      const cbss::SeparationResult s = cbss::separate_with_labels(X, std::move(rep), sep_seed);
      ensure_dir(sep_out);
      cbss::io::write_matrix_csv(sep_out + "/S_hat.csv", s.S_hat, "s");
      cbss::io::write_json(sep_out + "/B_hat.json", cbss::io::matrix_json(s.unmixing.B_hat));
      cbss::io::write_score_report(sep_out, s.report);
      std::cout << "retained=" << s.retained_count << " converged=" << (s.unmixing.converged ? 1 : 0)
                << " iterations=" << s.unmixing.iterations << '\n';
      if (!sep_truth.empty()) {
        const cbss::Matrix S = cbss::io::read_matrix_csv(sep_truth);
        std::cout << "mse=" << cbss::io::format_double(cbss::mse(s.S_hat, S)) << '\n';
      }
      return 0;
    }

    if (*exp) {
      cbss::ExperimentConfig cfg = cbss::config_from_json(cbss::io::read_json(exp_config));
      if (exp_trials > 0) cfg.trials = exp_trials;
      if (exp_seed_set) cfg.seed = exp_seed;
      if (!exp_out.empty()) cfg.output_dir = exp_out;
      cfg.validate();
      const cbss::ExperimentReport rep = cbss::run_experiment(cfg, cbss::default_threads());
      ensure_dir(cfg.output_dir);
      cbss::write_experiment(cfg.output_dir, rep, cbss::version);
      std::cout << cbss::report_markdown(rep);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
