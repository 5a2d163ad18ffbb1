#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "rarhsmm/model.hpp"

namespace rarhsmm {

// K x D log-domain message at one modeled step; column i is duration i+1.
using LogSlice =
    Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Log-domain copies of pi, A and lambda, renormalized to absorb the
/// rounding allowed by validation.
struct LogParams {
  Vector log_pi;
  Matrix log_A;      // log_A(j, k) = log A[j][k]
  LogSlice log_lambda;  // K x D

  static LogParams from(const ModelParams& model);
};

struct ForwardOptions {
  // Store every slice when T*K*D stays below this; otherwise keep one
  // checkpoint every ceil(sqrt(T)) steps and recompute during backward.
  std::size_t max_stored_cells = std::size_t{1} << 24;
  // Explicit checkpoint stride; 0 picks one from max_stored_cells.
  std::size_t stride = 0;
};

/// Output of the forward sweep. Modeled steps are t = 0..T-1 and correspond
/// to samples n = p + t; the first p samples only provide AR context.
struct ForwardResult {
  double loglik = 0.0;
  std::size_t stride = 1;
  std::vector<LogSlice> checkpoints;  // alpha at t = 0, stride, 2*stride, ...
  LogSlice final_slice;
  Matrix log_alpha_end1;  // T x K: alpha_t(k, duration 1)
  Matrix emissions;       // T x K emission log-likelihoods

  std::size_t steps() const { return static_cast<std::size_t>(emissions.rows()); }
};

ForwardResult forward(const ModelParams& model, const Sequence& seq,
                      const ForwardOptions& opts = {});

// Forward sweep over precomputed emission log-likelihoods (T x K).
ForwardResult forward_emissions(const ModelParams& model, Matrix emissions,
                                const ForwardOptions& opts = {});

// Single recursion step: next = emission + log(decrement + renewal mass).
void forward_step(const LogParams& lp, const LogSlice& prev,
                  const Eigen::Ref<const Vector>& emission, LogSlice& next);

using BackwardVisitor =
    std::function<void(std::size_t t, const LogSlice& log_alpha,
                       const LogSlice& log_beta)>;

/// Backward sweep from t = T-1 down to 0. The visitor sees the forward and
/// backward messages of each step, newest first; forward slices between
/// checkpoints are recomputed on the fly.
void backward(const ModelParams& model, const ForwardResult& fwd,
              const BackwardVisitor& visit);

/// Sum of per-sequence marginal log-likelihoods.
double loglikelihood(const ModelParams& model, std::span<const Sequence> seqs,
                     const ForwardOptions& opts = {});

}  // namespace rarhsmm
