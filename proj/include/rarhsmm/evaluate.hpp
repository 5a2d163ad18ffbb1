#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rarhsmm/model.hpp"

namespace rarhsmm {

struct Confusion {
  long long tp = 0, fp = 0, tn = 0, fn = 0;
};

Confusion confusion(const LabelTrack& pred, const LabelTrack& truth);

struct Score {
  double value = 0.0;
  bool degenerate = false;  // zero denominator; value reported as 0
};

Score mcc(const LabelTrack& pred, const LabelTrack& truth);
Score f1(const LabelTrack& pred, const LabelTrack& truth);

struct EventMetrics {
  double sensitivity = 0.0;
  double false_positives_per_second = 0.0;
  int truth_events = 0;
  int detected_events = 0;
  int predicted_events = 0;
  int false_positive_events = 0;
};

/// Events are maximal runs of positive samples. A truth event counts as
/// detected when any predicted event overlaps it; predicted events that
/// overlap no truth event are false positives.
EventMetrics event_metrics(const LabelTrack& pred, const LabelTrack& truth,
                           double sample_rate);

// -loglikelihood(model, seqs) / seqs.size().
double predictive_nll(const ModelParams& model, std::span<const Sequence> seqs);

struct MetricsReport {
  std::optional<Score> mcc;
  std::optional<Score> f1;
  std::optional<EventMetrics> events;
  std::optional<double> nll;
  std::size_t n_samples = 0;
  double sample_rate = 0.0;
};

// key=value lines.
void write_report(std::ostream& out, const MetricsReport& report);
std::string report_json(const MetricsReport& report);

}  // namespace rarhsmm
