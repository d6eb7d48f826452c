#include "adapart/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "adapart/errors.hpp"
#include "adapart/rng.hpp"

namespace adapart {

using nlohmann::json;

namespace {

std::string family_name(TruthSpec::Family family) {
  switch (family) {
    case TruthSpec::Family::piecewise: return "piecewise";
    case TruthSpec::Family::holder_1d: return "holder_1d";
    case TruthSpec::Family::bounded_variation_1d: return "bounded_variation_1d";
    case TruthSpec::Family::haar_sparse: return "haar_sparse";
  }
  throw std::logic_error("unreachable");
}

TruthSpec::Family family_from_name(const std::string& name) {
  if (name == "piecewise") return TruthSpec::Family::piecewise;
  if (name == "holder_1d") return TruthSpec::Family::holder_1d;
  if (name == "bounded_variation_1d") return TruthSpec::Family::bounded_variation_1d;
  if (name == "haar_sparse") return TruthSpec::Family::haar_sparse;
  throw std::invalid_argument("unknown truth family: " + name);
}

json truth_to_json(const TruthSpec& spec) {
  json j;
  j["family"] = family_name(spec.family);
  if (spec.piecewise) j["piecewise"] = spec.piecewise->serialize();
  j["holder_beta"] = spec.holder_beta;
  j["holder_L"] = spec.holder_L;
  j["bv_knots"] = spec.bv_knots;
  j["bv_values"] = spec.bv_values;
  j["haar_levels"] = spec.haar_levels;
  j["haar_decay"] = spec.haar_decay;
  j["haar_scale"] = spec.haar_scale;
  if (spec.nominal_r) j["nominal_r"] = *spec.nominal_r;
  return j;
}

TruthSpec truth_from_json(const json& j) {
  TruthSpec spec;
  spec.family = family_from_name(j.at("family").get<std::string>());
  if (j.contains("piecewise"))
    spec.piecewise = PiecewiseDensity::deserialize(j.at("piecewise").get<std::string>());
  if (j.contains("holder_beta")) spec.holder_beta = j.at("holder_beta").get<double>();
  if (j.contains("holder_L")) spec.holder_L = j.at("holder_L").get<double>();
  if (j.contains("bv_knots")) spec.bv_knots = j.at("bv_knots").get<std::vector<double>>();
  if (j.contains("bv_values")) spec.bv_values = j.at("bv_values").get<std::vector<double>>();
  if (j.contains("haar_levels")) spec.haar_levels = j.at("haar_levels").get<int>();
  if (j.contains("haar_decay")) spec.haar_decay = j.at("haar_decay").get<double>();
  if (j.contains("haar_scale")) spec.haar_scale = j.at("haar_scale").get<double>();
  if (j.contains("nominal_r")) spec.nominal_r = j.at("nominal_r").get<double>();
  return spec;
}

std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  prior.validate();
  rate.validate();
  if (n_grid.empty()) throw std::invalid_argument("n_grid must be nonempty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 2) throw std::invalid_argument("every n must be at least 2");
    if (i > 0 && n_grid[i] <= n_grid[i - 1])
      throw std::invalid_argument("n_grid must be strictly increasing");
  }
  if (replicates < 1) throw std::invalid_argument("replicates must be at least 1");
  if (mcmc_iterations < 1) throw std::invalid_argument("mcmc_iterations must be positive");
  if (i_max < 1) throw std::invalid_argument("i_max must be positive");
}

std::string ExperimentConfig::to_json_text() const {
  json j;
  j["truth"] = truth_to_json(truth);
  j["truth_seed"] = truth_seed;
  j["prior"] = {{"lambda", prior.lambda},
                {"alpha", prior.alpha},
                {"trunc_D", prior.trunc_D},
                {"trunc_kappa", prior.trunc_kappa},
                {"n_cap", prior.n_cap}};
  j["rate"] = {{"r", rate.r},
               {"A2", rate.A2},
               {"c1", rate.c1},
               {"c_prime", rate.c_prime},
               {"c_star", rate.c_star}};
  j["n_grid"] = n_grid;
  j["replicates"] = replicates;
  j["base_seed"] = base_seed;
  j["estimator"] = estimator == Estimator::posterior_mean ? "posterior_mean" : "sieve_mle";
  j["sampler"] = sampler == Sampler::exact ? "exact" : "mcmc";
  j["mcmc_iterations"] = mcmc_iterations;
  j["mcmc_burn_in"] = mcmc_burn_in;
  j["i_max"] = i_max;
  j["refine_cap"] = refine_cap;
  j["output_dir"] = output_dir;
  return j.dump();
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  if (j.contains("truth")) c.truth = truth_from_json(j.at("truth"));
  if (j.contains("truth_seed")) c.truth_seed = j.at("truth_seed").get<std::uint64_t>();
  if (j.contains("prior")) {
    const json& p = j.at("prior");
    if (p.contains("lambda")) c.prior.lambda = p.at("lambda").get<double>();
    if (p.contains("alpha")) c.prior.alpha = p.at("alpha").get<double>();
    if (p.contains("trunc_D")) c.prior.trunc_D = p.at("trunc_D").get<double>();
    if (p.contains("trunc_kappa")) c.prior.trunc_kappa = p.at("trunc_kappa").get<double>();
    if (p.contains("n_cap")) c.prior.n_cap = p.at("n_cap").get<int>();
  }
  if (j.contains("rate")) {
    const json& r = j.at("rate");
    if (r.contains("r")) c.rate.r = r.at("r").get<double>();
    if (r.contains("A2")) c.rate.A2 = r.at("A2").get<double>();
    if (r.contains("c1")) c.rate.c1 = r.at("c1").get<double>();
    if (r.contains("c_prime")) c.rate.c_prime = r.at("c_prime").get<double>();
    if (r.contains("c_star")) c.rate.c_star = r.at("c_star").get<double>();
  }
  if (j.contains("n_grid")) c.n_grid = j.at("n_grid").get<std::vector<long>>();
  if (j.contains("replicates")) c.replicates = j.at("replicates").get<int>();
  if (j.contains("base_seed")) c.base_seed = j.at("base_seed").get<std::uint64_t>();
  if (j.contains("estimator")) {
    const std::string name = j.at("estimator").get<std::string>();
    if (name == "posterior_mean") c.estimator = Estimator::posterior_mean;
    else if (name == "sieve_mle") c.estimator = Estimator::sieve_mle;
    else throw std::invalid_argument("unknown estimator: " + name);
  }
  if (j.contains("sampler")) {
    const std::string name = j.at("sampler").get<std::string>();
    if (name == "exact") c.sampler = Sampler::exact;
    else if (name == "mcmc") c.sampler = Sampler::mcmc;
    else throw std::invalid_argument("unknown sampler: " + name);
  }
  if (j.contains("mcmc_iterations")) c.mcmc_iterations = j.at("mcmc_iterations").get<long>();
  if (j.contains("mcmc_burn_in")) c.mcmc_burn_in = j.at("mcmc_burn_in").get<long>();
  if (j.contains("i_max")) c.i_max = j.at("i_max").get<int>();
  if (j.contains("refine_cap")) c.refine_cap = j.at("refine_cap").get<int>();
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

std::string ExperimentConfig::hash() const {
  const std::string text = to_json_text();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

// ---------------------------------------------------------------------------
// Ingestion.

IngestResult ingest_text(const std::string& text, bool rescale, const std::string& origin,
                         bool clamp, long* clamped) {
  if (clamped) *clamped = 0;
  std::istringstream in(text);
  std::vector<double> coords;
  int width = -1;
  long row = 0, data_rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++row;
    for (char& c : line)
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    std::istringstream cells(line);
    std::vector<double> values;
    std::string cell;
    while (cells >> cell) {
      std::size_t used = 0;
      double value;
      try {
        value = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw IngestError(origin + ": non-numeric cell '" + cell + "' at row " +
                          std::to_string(row));
      }
      if (used != cell.size())
        throw IngestError(origin + ": non-numeric cell '" + cell + "' at row " +
                          std::to_string(row));
      if (!std::isfinite(value))
        throw IngestError(origin + ": non-finite value at row " + std::to_string(row));
      values.push_back(value);
    }
    if (values.empty()) continue;  // blank line
    if (width < 0) width = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != width)
      throw IngestError(origin + ": ragged row " + std::to_string(row) + " (expected " +
                        std::to_string(width) + " columns, got " +
                        std::to_string(values.size()) + ")");
    coords.insert(coords.end(), values.begin(), values.end());
    ++data_rows;
  }
  if (data_rows == 0) throw IngestError(origin + ": no data rows");

  std::optional<RescaleMap> map;
  if (rescale) {
    RescaleMap m;
    m.offset.assign(static_cast<std::size_t>(width), 0.0);
    m.scale.assign(static_cast<std::size_t>(width), 1.0);
    for (int k = 0; k < width; ++k) {
      double lo = coords[static_cast<std::size_t>(k)], hi = lo;
      for (long j = 0; j < data_rows; ++j) {
        const double y = coords[static_cast<std::size_t>(j) * width + k];
        lo = std::min(lo, y);
        hi = std::max(hi, y);
      }
      if (hi <= lo)
        throw IngestError(origin + ": column " + std::to_string(k + 1) +
                          " is constant and cannot be rescaled");
      m.offset[static_cast<std::size_t>(k)] = lo;
      m.scale[static_cast<std::size_t>(k)] = 1.0 / (hi - lo);
    }
    for (long j = 0; j < data_rows; ++j)
      for (int k = 0; k < width; ++k) {
        double& y = coords[static_cast<std::size_t>(j) * width + k];
        y = std::clamp((y - m.offset[static_cast<std::size_t>(k)]) *
                           m.scale[static_cast<std::size_t>(k)],
                       0.0, 1.0);
      }
    map = std::move(m);
  } else {
    for (long j = 0; j < data_rows; ++j)
      for (int k = 0; k < width; ++k) {
        double& y = coords[static_cast<std::size_t>(j) * width + k];
        if (!(y >= 0.0 && y <= 1.0)) {
          if (!clamp)
            throw IngestError(origin + ": value outside [0,1] at row " +
                              std::to_string(j + 1) + " (pass rescale to normalize)");
          y = std::clamp(y, 0.0, 1.0);
          if (clamped) ++*clamped;
        }
      }
  }
  return {Dataset(width, std::move(coords)), std::move(map)};
}

IngestResult ingest(const std::string& path, bool rescale, bool clamp, long* clamped) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open data file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return ingest_text(buffer.str(), rescale, path, clamp, clamped);
}

// ---------------------------------------------------------------------------
// Rate experiment.

namespace {

int thread_count(std::size_t cells) {
  long threads = 0;
  if (const char* env = std::getenv("ADAPART_THREADS")) threads = std::atol(env);
  if (threads < 1) threads = static_cast<long>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  return static_cast<int>(std::min<long>(threads, static_cast<long>(cells)));
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size();
  return m % 2 == 1 ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
}

PiecewiseDensity fit_cell(const ExperimentConfig& config, const TruthDensity& truth,
                          const PriorModel& prior, const Dataset& data,
                          std::uint64_t seed) {
  if (config.estimator == Estimator::sieve_mle) {
    const int I = static_cast<int>(sieve_size_schedule(
        static_cast<double>(data.n()), config.rate.r, config.rate.A2, config.rate.c1));
    return sieve_mle(data, I, SieveStrategy::greedy);
  }
  PosteriorSummary summary;
  if (config.sampler == Sampler::exact) {
    summary = exact_posterior(data, prior, config.i_max);
  } else {
    McmcOptions options;
    options.iterations = config.mcmc_iterations;
    options.burn_in = config.mcmc_burn_in;
    options.seed = derive_seed(seed, 0x6d636d63);
    summary = mcmc_posterior(data, prior, options);
  }
  return posterior_mean_density(summary, config.refine_cap);
}

}  // namespace

RateReport run_rate_experiment(const ExperimentConfig& config) {
  config.validate();
  const TruthDensity truth = make_truth(config.truth, config.truth_seed);
  const PriorModel prior(config.prior, truth.dim);

  RateReport report;
  report.config_hash = config.hash();
  for (long n : config.n_grid)
    for (int rep = 0; rep < config.replicates; ++rep)
      report.cells.push_back(
          {n, rep, derive_seed(config.base_seed, static_cast<std::uint64_t>(n),
                               static_cast<std::uint64_t>(rep)),
           0.0, 0.0});

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(report.cells.size());
  auto worker = [&] {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= report.cells.size()) return;
      RateCell& cell = report.cells[idx];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const Dataset data =
            Dataset::from_points(truth.sample(static_cast<int>(cell.n), cell.seed));
        const PiecewiseDensity fitted = fit_cell(config, truth, prior, data, cell.seed);
        cell.error = hellinger_to_truth(truth, fitted);
      } catch (...) {
        try {
          std::rethrow_exception(std::current_exception());
        } catch (const std::exception& e) {
          failures[idx] = std::make_exception_ptr(std::runtime_error(
              std::string(e.what()) + " [n=" + std::to_string(cell.n) +
              ", replicate=" + std::to_string(cell.replicate) +
              ", seed=" + std::to_string(cell.seed) + "]"));
        }
      }
      cell.runtime_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    }
  };
  std::vector<std::thread> pool;
  const int threads = thread_count(report.cells.size());
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);

  for (long n : config.n_grid) {
    std::vector<double> errors;
    for (const auto& cell : report.cells)
      if (cell.n == n) errors.push_back(cell.error);
    report.median_curve.emplace_back(static_cast<double>(n), median(std::move(errors)));
  }
  report.fit = fit_rate_exponent(report.median_curve);
  return report;
}

std::string RateReport::table() const {
  std::ostringstream os;
  os << "n\treplicate\tseed\terror\n";
  for (const auto& cell : cells)
    os << cell.n << '\t' << cell.replicate << '\t' << cell.seed << '\t'
       << format_double(cell.error) << '\n';
  return os.str();
}

std::string RateReport::timings_table() const {
  std::ostringstream os;
  os << "n\treplicate\truntime_ms\n";
  for (const auto& cell : cells)
    os << cell.n << '\t' << cell.replicate << '\t' << format_double(cell.runtime_ms) << '\n';
  return os.str();
}

std::string RateReport::manifest(const ExperimentConfig& config) const {
  std::ostringstream os;
  os << "adapart-rate-manifest v1\n";
  os << "config_hash " << config_hash << '\n';
  os << "config " << config.to_json_text() << '\n';
  os << "slope " << format_double(fit.slope) << '\n';
  os << "intercept " << format_double(fit.intercept) << '\n';
  os << "slope_std_error " << format_double(fit.slope_std_error) << '\n';
  os << "r_squared " << format_double(fit.r_squared) << '\n';
  for (const auto& [n, err] : median_curve)
    os << "median " << static_cast<long>(n) << ' ' << format_double(err) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Model artifact.

std::string ModelArtifact::serialize() const {
  if (density.has_value() == posterior.has_value())
    throw std::invalid_argument("artifact must hold exactly one of density, posterior");
  std::ostringstream os;
  os << "adapart-model v1\n";
  os << "kind " << (density ? "density" : "posterior") << '\n';
  os << "config_hash " << config_hash << '\n';
  os << "seed " << seed << '\n';
  os << "payload\n";
  os << (density ? density->serialize() : posterior->serialize());
  return os.str();
}

ModelArtifact ModelArtifact::deserialize(const std::string& text) {
  std::istringstream is(text);
  std::string magic, version, tag, kind;
  is >> magic >> version;
  if (magic != "adapart-model" || version != "v1")
    throw std::invalid_argument("unrecognized model artifact header");
  ModelArtifact out;
  is >> tag >> kind >> tag >> out.config_hash >> tag >> out.seed >> tag;
  if (!is || tag != "payload") throw std::invalid_argument("malformed model artifact");
  std::string payload;
  std::getline(is, payload);  // consume end of the payload marker line
  std::ostringstream rest;
  rest << is.rdbuf();
  payload = rest.str();
  if (kind == "density") {
    out.density = PiecewiseDensity::deserialize(payload);
  } else if (kind == "posterior") {
    out.posterior = PosteriorSummary::deserialize(payload);
  } else {
    throw std::invalid_argument("unknown artifact kind: " + kind);
  }
  return out;
}

void ModelArtifact::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write artifact: " + path);
  out << serialize();
}

ModelArtifact ModelArtifact::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read artifact: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize(buffer.str());
}

}  // namespace adapart
