#pragma once

#include <stdexcept>
#include <string>

namespace adapart {

// Enumeration or refinement would exceed a configured cap.
class ResourceError : public std::runtime_error {
 public:
  explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

// KL-type quantity requested against a density that vanishes on a cell
// carrying mass of the reference density.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Rejection sampler failed to produce an admissible draw.
class SamplingError : public std::runtime_error {
 public:
  explicit SamplingError(const std::string& what) : std::runtime_error(what) {}
};

// Prior puts zero mass on the requested object (e.g. partition size above
// the sample-size cap).
class ZeroPriorMassError : public std::runtime_error {
 public:
  explicit ZeroPriorMassError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file.
class IngestError : public std::runtime_error {
 public:
  explicit IngestError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace adapart
