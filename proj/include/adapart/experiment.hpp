#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "adapart/density.hpp"
#include "adapart/inference.hpp"
#include "adapart/prior.hpp"
#include "adapart/rates.hpp"
#include "adapart/synthetic.hpp"

namespace adapart {

enum class Estimator { posterior_mean, sieve_mle };
enum class Sampler { exact, mcmc };

/// Everything a rate experiment needs, loadable from a JSON config file.
struct ExperimentConfig {
  TruthSpec truth;
  std::uint64_t truth_seed = 0;
  PriorParams prior{1.0, 0.5, 1.0, 6.0, 30};
  RateParams rate{1.0, 1.0, 0.5, 0.0, 1.0 + std::numbers::ln2};
  std::vector<long> n_grid;
  int replicates = 1;
  std::uint64_t base_seed = 0;
  Estimator estimator = Estimator::posterior_mean;
  Sampler sampler = Sampler::mcmc;
  long mcmc_iterations = 4000;
  long mcmc_burn_in = -1;
  int i_max = 8;             // exact-posterior size cap
  int refine_cap = 1 << 15;  // posterior-mean refinement cap
  std::string output_dir = ".";

  void validate() const;

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
  std::string to_json_text() const;  // canonical, key-sorted

  /// FNV-1a over the canonical JSON text, as fixed-width hex.
  std::string hash() const;
};

/// Per-column affine map (y - offset) * scale recorded during ingestion.
struct RescaleMap {
  std::vector<double> offset;
  std::vector<double> scale;
};

struct IngestResult {
  Dataset data;
  std::optional<RescaleMap> map;
};

/// Loads delimiter-separated numeric rows (whitespace or commas). With
/// rescale, each column is mapped affinely from its observed range onto
/// [0,1]. Throws IngestError naming the offending row; with clamp,
/// out-of-range values are clamped into [0,1] instead (the count of clamped
/// values is reported through *clamped when given).
IngestResult ingest(const std::string& path, bool rescale, bool clamp = false,
                    long* clamped = nullptr);
IngestResult ingest_text(const std::string& text, bool rescale,
                         const std::string& origin = "<memory>", bool clamp = false,
                         long* clamped = nullptr);

struct RateCell {
  long n = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  double error = 0.0;
  double runtime_ms = 0.0;  // excluded from the deterministic report
};

struct RateReport {
  std::string config_hash;
  std::vector<RateCell> cells;  // sorted by (n, replicate)
  std::vector<std::pair<double, double>> median_curve;  // (n, median error)
  RateFit fit;

  std::string table() const;          // deterministic TSV
  std::string timings_table() const;  // wall-clock per cell, not deterministic
  std::string manifest(const ExperimentConfig& config) const;
};

/// Samples data from the truth for every (n, replicate) cell, fits the
/// configured estimator, and fits the error-vs-n rate exponent on per-n
/// medians. Cells run in parallel (ADAPART_THREADS overrides the count);
/// results are deterministic in (config, base_seed).
RateReport run_rate_experiment(const ExperimentConfig& config);

/// Fitted model plus provenance, in a versioned text format.
struct ModelArtifact {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::optional<PiecewiseDensity> density;     // kind "density"
  std::optional<PosteriorSummary> posterior;   // kind "posterior"

  std::string serialize() const;
  static ModelArtifact deserialize(const std::string& text);
  void save(const std::string& path) const;
  static ModelArtifact load(const std::string& path);
};

}  // namespace adapart
