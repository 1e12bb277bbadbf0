#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ptx {

// Every failure raised by the library derives from Error so callers can
// catch the whole family at the CLI boundary.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class DimensionError : public Error { using Error::Error; };
class BoundsError : public Error { using Error::Error; };
class ParameterError : public Error { using Error::Error; };
class SchemaError : public Error { using Error::Error; };
class StratificationError : public Error { using Error::Error; };
class CacheIntegrityError : public Error { using Error::Error; };
class AlignmentError : public Error { using Error::Error; };
class ResamplingError : public Error { using Error::Error; };
class TrainingError : public Error { using Error::Error; };
class SelectionError : public Error { using Error::Error; };
class UsageError : public Error { using Error::Error; };

class DegenerateDensityError : public ResamplingError {
  using ResamplingError::ResamplingError;
};

class ConvergenceError : public TrainingError {
public:
  ConvergenceError(const std::string& what, double gap, long iterations)
      : TrainingError(what), gap_(gap), iterations_(iterations) {}
  double gap() const noexcept { return gap_; }
  long iterations() const noexcept { return iterations_; }

private:
  double gap_;
  long iterations_;
};

/// Aggregated per-sample failures from a feature-extraction run.
class ExtractionError : public Error {
public:
  explicit ExtractionError(std::vector<std::string> failures)
      : Error(summarize(failures)), failures_(std::move(failures)) {}
  const std::vector<std::string>& failures() const noexcept { return failures_; }

private:
  static std::string summarize(const std::vector<std::string>& f) {
    std::string s = std::to_string(f.size()) + " sample(s) failed:";
    for (const auto& m : f) s += "\n  " + m;
    return s;
  }
  std::vector<std::string> failures_;
};

}  // namespace ptx
