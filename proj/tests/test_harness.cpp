#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <string>

#include "adapart/errors.hpp"
#include "adapart/experiment.hpp"
#include "adapart/rng.hpp"
#include "helpers.hpp"

using namespace adapart;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig config;
  config.truth.family = TruthSpec::Family::piecewise;
  config.truth.piecewise =
      PiecewiseDensity(BinaryPartition::unit_cube(1).split(0, 0), {0.8, 0.2});
  config.prior.n_cap = 4;
  config.n_grid = {100, 400, 2000};
  config.replicates = 6;
  config.base_seed = 17;
  config.estimator = Estimator::posterior_mean;
  config.sampler = Sampler::exact;
  config.i_max = 4;
  return config;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path("/tmp/adapart_test_" + name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("config JSON round trip and validation") {
  auto config = small_config();
  auto text = config.to_json_text();
  auto back = ExperimentConfig::from_json_text(text);
  CHECK(back.to_json_text() == text);
  CHECK(back.hash() == config.hash());
  CHECK(back.n_grid == config.n_grid);
  CHECK(back.truth.piecewise->serialize() == config.truth.piecewise->serialize());

  SUBCASE("n_grid must increase strictly") {
    config.n_grid = {100, 100};
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    config.n_grid = {200, 100};
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    config.n_grid = {};
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  }
  SUBCASE("replicates must be positive") {
    config.replicates = 0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  }
  SUBCASE("bad JSON") {
    CHECK_THROWS_AS(ExperimentConfig::from_json_text("{nope"), std::invalid_argument);
  }
  SUBCASE("different configs hash differently") {
    auto other = small_config();
    other.base_seed = 18;
    CHECK(other.hash() != config.hash());
  }
}

TEST_CASE("ingestion") {
  SUBCASE("clean 3x2 file") {
    auto result = ingest_text("0.1 0.2\n0.5 0.5\n0.9 0.8\n", false);
    CHECK(result.data.n() == 3);
    CHECK(result.data.dim() == 2);
    CHECK(!result.map.has_value());
  }
  SUBCASE("comma and tab delimiters") {
    auto result = ingest_text("0.1,0.2\n0.5\t0.5\n", false);
    CHECK(result.data.n() == 2);
  }
  SUBCASE("rescale maps min to 0 and max to 1 exactly") {
    auto result = ingest_text("10 5\n30 6\n20 9\n", true);
    REQUIRE(result.map.has_value());
    CHECK(result.data.point(0)[0] == 0.0);
    CHECK(result.data.point(1)[0] == 1.0);
    CHECK(result.data.point(0)[1] == 0.0);
    CHECK(result.data.point(2)[1] == 1.0);
    CHECK(result.data.point(2)[0] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("NaN at row 7 names row 7") {
    std::string text = "0.1\n0.2\n0.3\n0.4\n0.5\n0.6\nnan\n0.8\n";
    CHECK_THROWS_WITH_AS(ingest_text(text, false), doctest::Contains("row 7"), IngestError);
  }
  SUBCASE("ragged rows") {
    CHECK_THROWS_WITH_AS(ingest_text("0.1 0.2\n0.3\n", false), doctest::Contains("row 2"),
                         IngestError);
  }
  SUBCASE("non-numeric cell") {
    CHECK_THROWS_AS(ingest_text("0.1\nabc\n", false), IngestError);
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(ingest_text("", false), IngestError);
    CHECK_THROWS_AS(ingest_text("\n\n", false), IngestError);
  }
  SUBCASE("out of range without rescale") {
    CHECK_THROWS_AS(ingest_text("0.5\n1.5\n", false), IngestError);
  }
  SUBCASE("clamp mode counts clamped values") {
    long clamped = 0;
    auto result = ingest_text("0.5\n1.5\n-0.25\n", false, "<memory>", true, &clamped);
    CHECK(clamped == 2);
    CHECK(result.data.point(1)[0] == 1.0);
    CHECK(result.data.point(2)[0] == 0.0);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(ingest("/nonexistent/file.tsv", false), IngestError);
  }
}

TEST_CASE("rate experiment is deterministic and error shrinks with n") {
  auto config = small_config();
  auto report1 = run_rate_experiment(config);
  auto report2 = run_rate_experiment(config);
  CHECK(report1.table() == report2.table());
  CHECK(report1.manifest(config) == report2.manifest(config));
  CHECK(report1.config_hash == config.hash());

  REQUIRE(report1.median_curve.size() == 3);
  CHECK(report1.median_curve[2].second < report1.median_curve[0].second);

  // Rows sorted by (n, replicate), with per-cell seeds derived from the base.
  REQUIRE(report1.cells.size() == 18);
  CHECK(report1.cells.front().n == 100);
  CHECK(report1.cells.back().n == 2000);
  CHECK(report1.cells[0].seed == derive_seed(17, 100, 0));
  CHECK(report1.cells[7].seed == derive_seed(17, 400, 1));

  // The deterministic report excludes runtimes; the timing table carries them.
  CHECK(report1.table().find("runtime") == std::string::npos);
  CHECK(report1.timings_table().find("runtime_ms") != std::string::npos);
}

TEST_CASE("rate experiment annotates failures with the cell") {
  auto config = small_config();
  config.refine_cap = 1;  // force a resource error inside a cell
  try {
    run_rate_experiment(config);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("n=") != std::string::npos);
    CHECK(std::string(e.what()).find("replicate=") != std::string::npos);
  }
}

TEST_CASE("model artifact round trip") {
  auto rng = make_rng(2);
  ModelArtifact artifact;
  artifact.config_hash = "00ff00ff00ff00ff";
  artifact.seed = 123456789012345ULL;
  artifact.density = testutil::random_density(rng, 2, 5);
  auto back = ModelArtifact::deserialize(artifact.serialize());
  CHECK(back.config_hash == artifact.config_hash);
  CHECK(back.seed == artifact.seed);
  REQUIRE(back.density.has_value());
  CHECK(back.density->partition() == artifact.density->partition());
  for (int i = 0; i < artifact.density->size(); ++i)
    CHECK(back.density->mass(i) == artifact.density->mass(i));
  CHECK(back.serialize() == artifact.serialize());

  SUBCASE("file persistence") {
    TempFile file("artifact.txt", "");
    artifact.save(file.path);
    auto loaded = ModelArtifact::load(file.path);
    CHECK(loaded.serialize() == artifact.serialize());
  }
  SUBCASE("malformed header") {
    CHECK_THROWS_AS(ModelArtifact::deserialize("garbage v9\n"), std::invalid_argument);
  }
}

TEST_CASE("config file loading") {
  auto config = small_config();
  TempFile file("config.json", config.to_json_text());
  auto loaded = ExperimentConfig::from_file(file.path);
  CHECK(loaded.hash() == config.hash());
  CHECK_THROWS_AS(ExperimentConfig::from_file("/nonexistent/config.json"),
                  std::invalid_argument);
}
