#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rarhsmm/model.hpp"
#include "rarhsmm/preprocess.hpp"

namespace rarhsmm::io {

// Plain-text series formats. Lines starting with '#' are comments, except
// "# rate=<Hz>" which records the sample rate.

struct Signal {
  std::vector<double> samples;
  std::optional<double> sample_rate;
};

/// One value per line, or "time,value" (time ignored).
Signal read_signal(const std::string& path);

// Requires a rate header.
Sequence read_sequence(const std::string& path);
void write_sequence(const std::string& path, const Sequence& seq);

/// One label per line; extra comma-separated columns are ignored so truth
/// files ("z,d") load as label tracks. Requires a rate header.
LabelTrack read_labels(const std::string& path);
void write_labels(const std::string& path, const LabelTrack& track);

// "z,d" per line.
HiddenPath read_truth(const std::string& path);
void write_truth(const std::string& path, const HiddenPath& path_data, double sample_rate);

/// "onset_seconds,duration_seconds[,scorer_id]" per line.
std::vector<EventAnnotation> read_annotations(const std::string& path);

// One comma-separated row of K regime probabilities per sample.
void write_posteriors(const std::string& path, const Matrix& gamma, double sample_rate);

}  // namespace rarhsmm::io
