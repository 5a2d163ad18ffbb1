#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rarhsmm/messages.hpp"
#include "rarhsmm/model.hpp"

namespace rarhsmm {

/// Expected complete-data statistics of one sequence under the current
/// parameters. Per-sample matrices have one row per sample; rows before
/// `context` (= p) are AR context: gamma copies the first modeled row and
/// omega/elogtau hold the prior moments of the precision.
struct SuffStats {
  Matrix gamma;      // N x K
  Matrix xi_agg;     // K x K, expected j -> k renewals
  Matrix dur_stats;  // K x D, expected entries into (k, duration d+1)
  Matrix omega;      // N x K, E[tau | z = k, y]
  Matrix elogtau;    // N x K, E[log tau | z = k, y]
  double loglik = 0.0;
  std::size_t context = 0;
};

SuffStats e_step(const ModelParams& model, const Sequence& seq,
                 const ForwardOptions& opts = {});

/// AR regression problem: row i predicts y[p + i] from the p preceding
/// samples, column j holding the sample j+1 steps back.
struct ArDesign {
  Matrix X;
  Vector y;
};

ArDesign ar_design(std::span<const double> y, int p);

struct WlsResult {
  Vector a;
  bool ridge = false;  // rank-deficient design; 1e-8 * I was added
};

/// Minimizes sum_i w_i^2 (y_i - <x_i, a>)^2 with a column-pivoting QR.
/// Throws DataError when fewer than p rows carry positive weight.
WlsResult weighted_least_squares(const Matrix& design, const Vector& targets,
                                 const Vector& weights);

/// sqrt(sum gamma*omega*r^2 / sum gamma); nullopt when sum gamma == 0.
std::optional<double> update_sigma(const Vector& gamma, const Vector& omega,
                                   const Vector& residuals);

inline constexpr double kNuLower = 1e-2;
inline constexpr double kNuUpper = 1e3;

struct NuSolution {
  double nu = 0.0;
  double residual = 0.0;  // equation value at nu
  bool clamped = false;
};

// Left-hand side of the degrees-of-freedom stationarity equation, where
// data_term = sum gamma (log omega - omega) / sum gamma.
double nu_equation(double nu, double data_term, double nu_prev);

/// Bisection root of nu_equation on [kNuLower, kNuUpper]; clamps to the
/// nearest endpoint when the bracket holds no sign change.
NuSolution solve_nu(const Vector& gamma, const Vector& omega, double nu_prev);

struct MStepOptions {
  double min_sigma = 1e-6;
  double lambda_smoothing = 1e-8;
  double min_regime_mass = 1e-8;
};

struct MStepResult {
  ModelParams model;
  std::vector<std::string> flags;
};

/// Closed-form updates of pi, A, lambda, AR weights and sigma, plus the
/// one-dimensional nu solve, from statistics summed over the batch.
MStepResult m_step(std::span<const SuffStats> stats, std::span<const Sequence> seqs,
                   const ModelParams& prev, const MStepOptions& opts = {});

struct EmOptions {
  int max_iters = 100;
  double rel_tol = 1e-6;
  double min_sigma = 1e-6;
  int threads = 1;
  ForwardOptions forward;
};

struct IterationRecord {
  int iteration = 0;
  double loglik = 0.0;
  double rel_change = 0.0;
  std::vector<std::string> flags;
};

struct FitResult {
  ModelParams model;
  std::vector<double> trace;  // loglik of each model visited, in order
  std::vector<IterationRecord> log;
  bool converged = false;
};

FitResult em_fit(std::span<const Sequence> seqs, const ModelParams& init,
                 const EmOptions& opts = {});

// "iteration,loglik,rel_change,flags" header plus one line per record;
// flags are joined with ';'.
void write_fit_log(std::ostream& out, std::span<const IterationRecord> log);

struct SupervisedOptions {
  int K = 2;
  int p = 5;
  int D = 1500;
  double initial_nu = 10.0;
  double sigma_rel_tol = 1e-8;
  int max_inner_iters = 5000;
  MStepOptions mstep;
};

/// Complete-data statistics from observed labels: gamma is the label
/// indicator, runs longer than D are split into D-sample chunks joined by
/// self-transitions (reported through `clipped`), and the run that reaches
/// the end of the sequence is right-censored so its length is not counted.
/// omega/elogtau are evaluated under `model`.
SuffStats dirac_stats(const ModelParams& model, const Sequence& seq,
                      const LabelTrack& labels, bool* clipped = nullptr);

struct SupervisedResult {
  ModelParams model;
  int inner_iterations = 0;
  std::vector<std::string> flags;
};

SupervisedResult supervised_fit(std::span<const Sequence> seqs,
                                std::span<const LabelTrack> labels,
                                const SupervisedOptions& opts);

struct InitConfig {
  int p = 5;
  double duration_seconds = 30.0;
  double seed_seconds = 5.0;
  double resonance_hz = 13.0;
  double pole_radius = 0.95;
  double spindle_mean_seconds = 1.0;
  double spindle_sd_seconds = 0.15;
  double initial_nu = 10.0;
};

/// Two-regime starting point for unsupervised fitting: pi = [1, 0],
/// A = [[0.5, 0.5], [1, 0]], regime 0 AR fitted on the first seed window,
/// regime 1 a damped resonator, uniform regime-0 durations and a discretized
/// normal for regime 1.
ModelParams default_unsupervised_init(std::span<const Sequence> seqs,
                                      const InitConfig& config = {});

}  // namespace rarhsmm
