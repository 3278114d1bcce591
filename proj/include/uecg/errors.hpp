#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace uecg {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };
struct IndexError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct TrainingError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct StateError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct LengthError : Error { using Error::Error; };
struct HeaderError : Error { using Error::Error; };
struct AnalysisError : Error { using Error::Error; };
struct AlignmentError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct SamplingError : Error { using Error::Error; };

// Carries the offending token trace so callers can show or log it.
struct MalformedGenerationError : Error {
  MalformedGenerationError(const std::string& what, std::vector<int> trace_ids)
      : Error(what), trace(std::move(trace_ids)) {}
  std::vector<int> trace;
};

}  // namespace uecg
