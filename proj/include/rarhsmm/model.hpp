#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace rarhsmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kSimplexTolerance = 1e-12;

// Raised when a model document or data file cannot be parsed.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for inconsistent inputs (dimension mismatch, bad labels, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Emission and duration parameters of a single regime.
struct RegimeParams {
  Vector a;       // AR weights; a[j] multiplies the sample j+1 steps back
  double sigma = 1.0;
  double nu = 1.0;
  Vector lambda;  // lambda[i] = P(duration = i+1 samples)

  friend bool operator==(const RegimeParams&, const RegimeParams&);
};

/// Full parameter set of the robust autoregressive explicit-duration model.
///
/// Durations are counted in samples. `A` is only consulted when a duration
/// counter reaches one; a nonzero diagonal entry means the regime renews
/// itself with a freshly drawn duration.
struct ModelParams {
  int K = 1;
  int p = 0;
  int D = 1;
  double sample_rate = 1.0;
  Vector pi;
  Matrix A;
  std::vector<RegimeParams> regimes;

  friend bool operator==(const ModelParams&, const ModelParams&);
};

struct Sequence {
  std::vector<double> samples;
  double sample_rate = 1.0;

  std::size_t size() const { return samples.size(); }
};

/// Per-sample regime labels and remaining-duration counters.
struct HiddenPath {
  std::vector<int> z;
  std::vector<int> d;
  std::optional<std::vector<double>> tau;
};

/// Per-sample regime labels (binary in the two-regime configuration).
struct LabelTrack {
  std::vector<int> labels;
  double sample_rate = 1.0;

  std::size_t size() const { return labels.size(); }
};

struct Violation {
  std::string field;
  std::ptrdiff_t index = -1;  // -1 when the violation is not element-specific
  double observed = 0.0;
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  explicit operator bool() const { return ok(); }
  std::string summary() const;
};

ValidationResult validate_model(const ModelParams& params);

// Throws DataError with the validation summary when the model is invalid.
void require_valid(const ModelParams& params);

// Rescales pi, the rows of A and every lambda to sum to exactly one.
// Only meaningful for models that already pass validation.
ModelParams renormalized(ModelParams params);

// Checks counter legality. Entries before `context` are AR context samples
// and are exempt from the entry-duration bound.
ValidationResult validate_path(const HiddenPath& path, int K, int D,
                               std::size_t context = 0);

void validate_sequence(const Sequence& seq, int p);

std::string serialize_model(const ModelParams& params);
ModelParams deserialize_model(std::string_view text);

ModelParams load_model(const std::string& path);
void save_model(const ModelParams& params, const std::string& path);

}  // namespace rarhsmm
