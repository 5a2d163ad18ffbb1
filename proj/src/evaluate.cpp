#include "rarhsmm/evaluate.hpp"

#include <cmath>
#include <ostream>
#include <utility>

#include <json.hpp>

#include "rarhsmm/messages.hpp"

namespace rarhsmm {

namespace {

void require_same_length(const LabelTrack& pred, const LabelTrack& truth) {
  if (pred.size() != truth.size())
    throw DataError("label tracks differ in length (" + std::to_string(pred.size()) +
                    " vs " + std::to_string(truth.size()) + ")");
}

std::vector<std::pair<std::size_t, std::size_t>> runs(const LabelTrack& t) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const auto& x = t.labels;
  for (std::size_t n = 0; n < x.size();) {
    if (x[n] == 0) {
      ++n;
      continue;
    }
    std::size_t end = n;
    while (end < x.size() && x[end] != 0) ++end;
    out.emplace_back(n, end);
    n = end;
  }
  return out;
}

bool any_positive(const LabelTrack& t, std::size_t begin, std::size_t end) {
  for (std::size_t n = begin; n < end; ++n)
    if (t.labels[n] != 0) return true;
  return false;
}

}  // namespace

Confusion confusion(const LabelTrack& pred, const LabelTrack& truth) {
  require_same_length(pred, truth);
  Confusion c;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    const bool p = pred.labels[n] != 0;
    const bool t = truth.labels[n] != 0;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Score mcc(const LabelTrack& pred, const LabelTrack& truth) {
  const Confusion c = confusion(pred, truth);
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (den == 0.0) return {0.0, true};
  return {(tp * tn - fp * fn) / std::sqrt(den), false};
}

Score f1(const LabelTrack& pred, const LabelTrack& truth) {
  const Confusion c = confusion(pred, truth);
  const bool empty_side = c.tp + c.fp == 0 || c.tp + c.fn == 0;
  if (c.tp == 0) return {0.0, empty_side};
  return {2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn), false};
}

EventMetrics event_metrics(const LabelTrack& pred, const LabelTrack& truth,
                           double sample_rate) {
  require_same_length(pred, truth);
  if (!(sample_rate > 0.0)) throw DataError("event_metrics: sample rate must be > 0");
  EventMetrics m;
  const auto truth_events = runs(truth);
  const auto pred_events = runs(pred);
  m.truth_events = static_cast<int>(truth_events.size());
  m.predicted_events = static_cast<int>(pred_events.size());
  for (const auto& [b, e] : truth_events)
    if (any_positive(pred, b, e)) ++m.detected_events;
  for (const auto& [b, e] : pred_events)
    if (!any_positive(truth, b, e)) ++m.false_positive_events;
  m.sensitivity = truth_events.empty()
                      ? 0.0
                      : static_cast<double>(m.detected_events) / static_cast<double>(m.truth_events);
  const double seconds = static_cast<double>(pred.size()) / sample_rate;
  m.false_positives_per_second =
      seconds > 0.0 ? static_cast<double>(m.false_positive_events) / seconds : 0.0;
  return m;
}

double predictive_nll(const ModelParams& model, std::span<const Sequence> seqs) {
  return -loglikelihood(model, seqs) / static_cast<double>(seqs.size());
}

void write_report(std::ostream& out, const MetricsReport& r) {
  const auto old = out.precision(17);
  out << "n_samples=" << r.n_samples << '\n';
  out << "sample_rate=" << r.sample_rate << '\n';
  if (r.mcc) {
    out << "mcc=" << r.mcc->value << '\n';
    if (r.mcc->degenerate) out << "mcc_degenerate=1\n";
  }
  if (r.f1) {
    out << "f1=" << r.f1->value << '\n';
    if (r.f1->degenerate) out << "f1_degenerate=1\n";
  }
  if (r.events) {
    out << "event_sensitivity=" << r.events->sensitivity << '\n';
    out << "event_false_positives_per_second=" << r.events->false_positives_per_second << '\n';
    out << "truth_events=" << r.events->truth_events << '\n';
    out << "detected_events=" << r.events->detected_events << '\n';
    out << "predicted_events=" << r.events->predicted_events << '\n';
    out << "false_positive_events=" << r.events->false_positive_events << '\n';
  }
  if (r.nll) out << "nll=" << *r.nll << '\n';
  out.precision(old);
}

std::string report_json(const MetricsReport& r) {
  nlohmann::json doc;
  doc["n_samples"] = r.n_samples;
  doc["sample_rate"] = r.sample_rate;
  if (r.mcc) doc["mcc"] = {{"value", r.mcc->value}, {"degenerate", r.mcc->degenerate}};
  if (r.f1) doc["f1"] = {{"value", r.f1->value}, {"degenerate", r.f1->degenerate}};
  if (r.events)
    doc["events"] = {{"sensitivity", r.events->sensitivity},
                     {"false_positives_per_second", r.events->false_positives_per_second},
                     {"truth_events", r.events->truth_events},
                     {"detected_events", r.events->detected_events},
                     {"predicted_events", r.events->predicted_events},
                     {"false_positive_events", r.events->false_positive_events}};
  if (r.nll) doc["nll"] = *r.nll;
  return doc.dump(2) + "\n";
}

}  // namespace rarhsmm
