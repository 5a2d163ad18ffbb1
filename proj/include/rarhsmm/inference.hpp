#pragma once

#include "rarhsmm/model.hpp"

namespace rarhsmm {

struct ViterbiResult {
  HiddenPath path;   // covers all N samples; the first p copy sample p
  double log_prob = 0.0;  // joint log-probability of the decoded (z, d, y)
};

/// Most probable (regime, counter) path. Ties go to the smaller regime index,
/// then to the smaller duration index.
ViterbiResult viterbi(const ModelParams& model, const Sequence& seq);

// Viterbi over precomputed emission log-likelihoods (T x K); the returned
// path has T entries.
ViterbiResult viterbi_emissions(const ModelParams& model, const Matrix& emissions);

LabelTrack labels_from_path(const HiddenPath& path, double sample_rate);

}  // namespace rarhsmm
