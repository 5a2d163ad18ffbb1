#pragma once

#include <span>
#include <vector>

#include "rarhsmm/model.hpp"

namespace rarhsmm {

struct EventAnnotation {
  double onset = 0.0;     // seconds
  double duration = 0.0;  // seconds
  int scorer_id = 0;
};

/// Rational-factor polyphase resampler (rate_in >= rate_out). The low-pass
/// is a linear-phase Kaiser-windowed sinc whose passband extends to 0.8 of
/// the output Nyquist frequency and whose stopband starts at Nyquist. Output
/// sample m sits at time m / rate_out, the filter delay is removed, and the
/// input is extended by repeating its edge samples.
std::vector<double> resample(std::span<const double> series, double rate_in,
                             double rate_out);

// Whole-series population z-score; throws DataError on zero variance.
std::vector<double> zscore(std::span<const double> series);

struct Rasterized {
  LabelTrack track;
  int clipped = 0;  // events truncated at (or lying past) the recording end
};

/// Sample n is labeled 1 iff n / sample_rate lies in [onset, onset + duration)
/// for some event.
Rasterized events_to_labels(std::span<const EventAnnotation> events,
                            double sample_rate, std::size_t n_samples);

/// Per-sample union (maximum label) of equally long tracks.
LabelTrack merge_expert_labels(std::span<const LabelTrack> tracks);

}  // namespace rarhsmm
