// Command-line front end: fitting, evaluation, sampling, rate experiments,
// partition enumeration, prior diagnostics and posterior mass queries.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "adapart/density.hpp"
#include "adapart/errors.hpp"
#include "adapart/experiment.hpp"
#include "adapart/inference.hpp"
#include "adapart/prior.hpp"
#include "adapart/rng.hpp"
#include "adapart/synthetic.hpp"

namespace {

using namespace adapart;

std::string format_double(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write output file: " + path);
  out << content;
}

ExperimentConfig load_config_or_default(const std::string& path) {
  if (path.empty()) {
    ExperimentConfig config;
    config.n_grid = {256};
    return config;
  }
  if (!std::filesystem::exists(path))
    // Missing input is a usage problem, signalled via CLI11's exit path.
    throw CLI::ValidationError("--config", "config file not found: " + path);
  return ExperimentConfig::from_file(path);
}

PiecewiseDensity artifact_density(const ModelArtifact& artifact, int refine_cap) {
  if (artifact.density) return *artifact.density;
  return posterior_mean_density(*artifact.posterior, refine_cap);
}

int run_fit(const std::string& data_path, bool rescale, const std::string& config_path,
            const std::string& output, std::uint64_t seed) {
  ExperimentConfig config = load_config_or_default(config_path);
  const IngestResult loaded = ingest(data_path, rescale);
  const Dataset& data = loaded.data;
  ModelArtifact artifact;
  artifact.config_hash = config.hash();
  artifact.seed = seed;
  if (config.estimator == Estimator::sieve_mle) {
    const int I = static_cast<int>(sieve_size_schedule(
        static_cast<double>(data.n()), config.rate.r, config.rate.A2, config.rate.c1));
    artifact.density = sieve_mle(data, I, SieveStrategy::greedy);
  } else {
    PriorModel prior(config.prior, data.dim());
    if (config.sampler == Sampler::exact) {
      artifact.posterior = exact_posterior(data, prior, config.i_max);
    } else {
      McmcOptions options;
      options.iterations = config.mcmc_iterations;
      options.burn_in = config.mcmc_burn_in;
      options.seed = derive_seed(seed, 0x6d636d63);
      artifact.posterior = mcmc_posterior(data, prior, options);
    }
  }
  artifact.save(output);
  std::cout << "wrote " << output << " (" << (artifact.density ? "density" : "posterior")
            << ", n=" << data.n() << ", p=" << data.dim() << ")\n";
  return 0;
}

int run_eval(const std::string& model_path, const std::string& data_path,
             const std::string& output, int refine_cap) {
  const ModelArtifact artifact = ModelArtifact::load(model_path);
  const PiecewiseDensity density = artifact_density(artifact, refine_cap);
  long clamped = 0;
  const IngestResult loaded = ingest(data_path, false, true, &clamped);
  if (clamped > 0)
    std::cerr << "warning: clamped " << clamped << " coordinate(s) into [0,1]\n";
  if (loaded.data.dim() != density.partition().dim())
    throw std::runtime_error("model dimension " +
                             std::to_string(density.partition().dim()) +
                             " does not match data dimension " +
                             std::to_string(loaded.data.dim()));
  std::ostringstream os;
  os << "density\n";
  for (long j = 0; j < loaded.data.n(); ++j)
    os << format_double(density.evaluate(loaded.data.point(j))) << '\n';
  if (output.empty())
    std::cout << os.str();
  else
    write_file(output, os.str());
  return 0;
}

int run_sample(const std::string& model_path, int count, std::uint64_t seed,
               const std::string& output, int refine_cap) {
  if (count < 1) throw CLI::ValidationError("--count", "must be positive");
  const ModelArtifact artifact = ModelArtifact::load(model_path);
  const PiecewiseDensity density = artifact_density(artifact, refine_cap);
  std::ostringstream os;
  os.precision(17);
  for (const auto& point : density.sample(count, seed)) {
    for (std::size_t k = 0; k < point.size(); ++k)
      os << (k ? "\t" : "") << point[k];
    os << '\n';
  }
  if (output.empty())
    std::cout << os.str();
  else
    write_file(output, os.str());
  return 0;
}

int run_rate_exp(const std::string& config_path, const std::string& output_dir) {
  if (!std::filesystem::exists(config_path))
    throw CLI::ValidationError("--config", "config file not found: " + config_path);
  ExperimentConfig config = ExperimentConfig::from_file(config_path);
  if (!output_dir.empty()) config.output_dir = output_dir;
  const RateReport report = run_rate_experiment(config);
  std::filesystem::create_directories(config.output_dir);
  const auto dir = std::filesystem::path(config.output_dir);
  write_file((dir / "report.tsv").string(), report.table());
  write_file((dir / "timings.tsv").string(), report.timings_table());
  write_file((dir / "manifest.txt").string(), report.manifest(config));
  std::cout << "slope " << format_double(report.fit.slope) << " +/- "
            << format_double(report.fit.slope_std_error) << " (r^2 "
            << format_double(report.fit.r_squared) << ")\n";
  std::cout << "wrote " << (dir / "report.tsv").string() << ", timings.tsv, manifest.txt\n";
  return 0;
}

int run_enumerate(int size, int dim, bool count_only) {
  const auto all = enumerate_partitions(size, dim);
  if (!count_only)
    for (const auto& q : all) std::cout << q.serialize();
  std::cout << "count " << all.size() << '\n';
  return 0;
}

int run_prior_check(const std::string& config_path, long draws, std::uint64_t seed) {
  ExperimentConfig config = load_config_or_default(config_path);
  std::cout << "I\talpha\teps\ttau\tlower_bound\tmc_mass\tmc_se\n";
  for (int I : {2, 3, 4}) {
    for (double alpha : {0.3, 0.5, 0.9}) {
      const double eps = 0.8 / I;
      // The bound needs tau < eps^2; fall back when the configured
      // truncation is too coarse for this cell.
      const double tau = std::min(config.prior.tau(I), 0.5 * eps * eps);
      const double bound = dirichlet_ball_mass_bound(I, alpha, eps, tau);
      // Ball mass around the barycenter under the truncated Dirichlet.
      auto rng = make_rng(derive_seed(seed, I, static_cast<std::uint64_t>(alpha * 100)));
      long hits = 0;
      const double center = 1.0 / I;
      for (long d = 0; d < draws; ++d) {
        const auto theta = sample_truncated_dirichlet(rng, I, alpha, tau);
        double l1 = 0.0;
        for (double t : theta) l1 += std::abs(t - center);
        if (l1 <= 2.0 * eps) ++hits;
      }
      const double mass = static_cast<double>(hits) / static_cast<double>(draws);
      const double se = std::sqrt(std::max(mass * (1.0 - mass), 1e-12) /
                                  static_cast<double>(draws));
      std::cout << I << '\t' << alpha << '\t' << format_double(eps) << '\t'
                << format_double(tau) << '\t' << format_double(bound) << '\t'
                << format_double(mass) << '\t' << format_double(se) << '\n';
    }
  }
  return 0;
}

int run_posterior_mass(const std::string& model_path, const std::string& config_path,
                       double radius, long draws, std::uint64_t seed) {
  const ModelArtifact artifact = ModelArtifact::load(model_path);
  if (!artifact.posterior)
    throw std::runtime_error("posterior-mass needs a posterior artifact, not a plain density");
  ExperimentConfig config = load_config_or_default(config_path);
  const TruthDensity truth = make_truth(config.truth, config.truth_seed);
  const double prob = posterior_concentration_probability(*artifact.posterior, truth, radius,
                                                          draws, seed, config.prior);
  std::cout << "P(hellinger >= " << format_double(radius) << ") = " << format_double(prob)
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive-partition density estimation toolkit"};
  app.require_subcommand(1);

  std::string config_path, data_path, model_path, output;
  std::uint64_t seed = 0;
  bool rescale = false, count_only = false;
  int size = 2, dim = 1, count = 100, refine_cap = 1 << 15;
  long draws = 100000;
  double radius = 0.1;

  auto* fit = app.add_subcommand("fit", "Fit a model to a data file");
  fit->add_option("--data", data_path, "delimiter-separated data file")->required();
  fit->add_flag("--rescale", rescale, "affinely map each column onto [0,1]");
  fit->add_option("--config", config_path, "experiment config (JSON)");
  fit->add_option("--output", output, "artifact path")->required();
  fit->add_option("--seed", seed, "random seed");

  auto* eval = app.add_subcommand("eval", "Evaluate a fitted model at points");
  eval->add_option("--model", model_path, "model artifact")->required();
  eval->add_option("--data", data_path, "points to evaluate")->required();
  eval->add_option("--output", output, "output file (default stdout)");
  eval->add_option("--refine-cap", refine_cap, "posterior-mean refinement cap");

  auto* sample = app.add_subcommand("sample", "Draw points from a fitted model");
  sample->add_option("--model", model_path, "model artifact")->required();
  sample->add_option("--count", count, "number of points");
  sample->add_option("--seed", seed, "random seed");
  sample->add_option("--output", output, "output file (default stdout)");
  sample->add_option("--refine-cap", refine_cap, "posterior-mean refinement cap");

  auto* rate = app.add_subcommand("rate-exp", "Run a convergence-rate experiment");
  rate->add_option("--config", config_path, "experiment config (JSON)")->required();
  rate->add_option("--output", output, "output directory (overrides config)");

  auto* enumerate = app.add_subcommand("enumerate", "List binary partitions of a given size");
  enumerate->add_option("--size", size, "partition size I")->required();
  enumerate->add_option("--dim", dim, "dimension p")->required();
  enumerate->add_flag("--count-only", count_only, "print only the count");

  auto* prior_check = app.add_subcommand(
      "prior-check", "Tabulate the truncated-Dirichlet ball-mass bound against Monte Carlo");
  prior_check->add_option("--config", config_path, "experiment config (JSON)");
  prior_check->add_option("--draws", draws, "Monte Carlo draws per cell");
  prior_check->add_option("--seed", seed, "random seed");

  auto* mass = app.add_subcommand("posterior-mass",
                                  "Posterior probability of a Hellinger ball complement");
  mass->add_option("--model", model_path, "posterior artifact")->required();
  mass->add_option("--config", config_path, "config holding the truth spec");
  mass->add_option("--radius", radius, "Hellinger radius");
  mass->add_option("--draws", draws, "Monte Carlo draws");
  mass->add_option("--seed", seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (fit->parsed()) return run_fit(data_path, rescale, config_path, output, seed);
    if (eval->parsed()) return run_eval(model_path, data_path, output, refine_cap);
    if (sample->parsed()) return run_sample(model_path, count, seed, output, refine_cap);
    if (rate->parsed()) return run_rate_exp(config_path, output);
    if (enumerate->parsed()) return run_enumerate(size, dim, count_only);
    if (prior_check->parsed()) return run_prior_check(config_path, draws, seed);
    if (mass->parsed()) return run_posterior_mass(model_path, config_path, radius, draws, seed);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
