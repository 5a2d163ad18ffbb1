#include "rarhsmm/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rarhsmm {

namespace {

struct Ratio {
  std::int64_t up = 1;
  std::int64_t down = 1;
};

// rate_out / rate_in as a reduced fraction; rates may carry up to six
// decimal digits.
Ratio rational_ratio(double rate_in, double rate_out) {
  for (double scale = 1.0; scale <= 1e6; scale *= 10.0) {
    const double a = rate_in * scale;
    const double b = rate_out * scale;
    if (std::abs(a - std::round(a)) < 1e-9 * scale &&
        std::abs(b - std::round(b)) < 1e-9 * scale) {
      auto num = static_cast<std::int64_t>(std::llround(b));
      auto den = static_cast<std::int64_t>(std::llround(a));
      const auto g = std::gcd(num, den);
      num /= g;
      den /= g;
      if (num > 4096)
        throw DataError("resample: rate ratio " + std::to_string(num) + "/" +
                        std::to_string(den) + " needs too large an upsampling factor");
      return {num, den};
    }
  }
  throw DataError("resample: rates are not rational to six decimal places");
}

std::vector<double> design_lowpass(double rate_up, double rate_out, std::int64_t phases) {
  constexpr double kAttenuationDb = 80.0;
  const double nyquist_out = 0.5 * rate_out;
  const double cutoff = 0.9 * nyquist_out / rate_up;      // cycles per sample
  const double transition = 0.2 * nyquist_out / rate_up;  // cycles per sample
  const double beta = 0.1102 * (kAttenuationDb - 8.7);
  auto taps = static_cast<std::int64_t>(std::ceil(
      (kAttenuationDb - 8.0) / (2.285 * 2.0 * std::numbers::pi * transition))) + 1;
  if (taps % 2 == 0) ++taps;

  std::vector<double> h(static_cast<std::size_t>(taps));
  const double center = 0.5 * static_cast<double>(taps - 1);
  const double norm = std::cyl_bessel_i(0.0, beta);
  for (std::int64_t i = 0; i < taps; ++i) {
    const double x = static_cast<double>(i) - center;
    const double arg = 2.0 * cutoff * x;
    const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
    const double r = x / center;
    const double window = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / norm;
    h[static_cast<std::size_t>(i)] = 2.0 * cutoff * sinc * window;
  }
  // Unit DC gain for every polyphase branch.
  for (std::int64_t phase = 0; phase < phases; ++phase) {
    double s = 0.0;
    for (std::int64_t i = phase; i < taps; i += phases) s += h[static_cast<std::size_t>(i)];
    for (std::int64_t i = phase; i < taps; i += phases) h[static_cast<std::size_t>(i)] /= s;
  }
  return h;
}

void require_finite(std::span<const double> series) {
  for (std::size_t i = 0; i < series.size(); ++i)
    if (!std::isfinite(series[i]))
      throw DataError("sample " + std::to_string(i) + " is not finite");
}

}  // namespace

std::vector<double> resample(std::span<const double> series, double rate_in,
                             double rate_out) {
  if (!(std::isfinite(rate_in) && rate_in > 0.0) ||
      !(std::isfinite(rate_out) && rate_out > 0.0))
    throw DataError("resample: rates must be positive");
  if (rate_out > rate_in)
    throw DataError("resample: only rate reduction is supported");
  require_finite(series);
  if (rate_in == rate_out || series.empty())
    return {series.begin(), series.end()};

  const Ratio ratio = rational_ratio(rate_in, rate_out);
  const std::int64_t L = ratio.up, M = ratio.down;
  const std::vector<double> h = design_lowpass(rate_in * static_cast<double>(L), rate_out, L);
  const auto taps = static_cast<std::int64_t>(h.size());
  const std::int64_t delay = (taps - 1) / 2;
  const auto n_in = static_cast<std::int64_t>(series.size());
  const std::int64_t n_out = (n_in * L + M - 1) / M;

  std::vector<double> out(static_cast<std::size_t>(n_out));
  for (std::int64_t m = 0; m < n_out; ++m) {
    // Position on the upsampled grid, shifted by the filter delay.
    const std::int64_t u = m * M + delay;
    double acc = 0.0;
    // Only taps aligned with real (non-stuffed) samples contribute.
    for (std::int64_t i = ((u % L) + L) % L; i < taps; i += L) {
      const std::int64_t src = (u - i) / L;
      acc += h[static_cast<std::size_t>(i)] * series[static_cast<std::size_t>(std::clamp<std::int64_t>(src, 0, n_in - 1))];
    }
    out[static_cast<std::size_t>(m)] = acc;
  }
  return out;
}

std::vector<double> zscore(std::span<const double> series) {
  if (series.size() < 2) throw DataError("zscore: need at least two samples");
  require_finite(series);
  const double n = static_cast<double>(series.size());
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : series) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  if (!(sd > 0.0)) throw DataError("zscore: zero variance");
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) out[i] = (series[i] - mean) / sd;
  // Remove the residual rounding offset of the first pass.
  const double drift = std::accumulate(out.begin(), out.end(), 0.0) / n;
  for (double& v : out) v -= drift;
  return out;
}

Rasterized events_to_labels(std::span<const EventAnnotation> events,
                            double sample_rate, std::size_t n_samples) {
  if (!(sample_rate > 0.0)) throw DataError("events_to_labels: sample rate must be > 0");
  Rasterized out;
  out.track.sample_rate = sample_rate;
  out.track.labels.assign(n_samples, 0);

  // Smallest n with n / sample_rate >= t.
  auto first_at_or_after = [&](double t) {
    auto n = static_cast<std::int64_t>(std::ceil(t * sample_rate));
    n = std::max<std::int64_t>(n, 0);
    while (n > 0 && static_cast<double>(n - 1) / sample_rate >= t) --n;
    while (static_cast<double>(n) / sample_rate < t) ++n;
    return n;
  };

  const auto total = static_cast<std::int64_t>(n_samples);
  for (const auto& ev : events) {
    if (!(ev.onset >= 0.0) || !(ev.duration > 0.0) || !std::isfinite(ev.onset + ev.duration))
      throw DataError("event needs onset >= 0 and duration > 0");
    const std::int64_t begin = first_at_or_after(ev.onset);
    std::int64_t end = first_at_or_after(ev.onset + ev.duration);
    if (end > total) {
      ++out.clipped;
      end = total;
    }
    for (std::int64_t n = begin; n < end; ++n) out.track.labels[static_cast<std::size_t>(n)] = 1;
  }
  return out;
}

LabelTrack merge_expert_labels(std::span<const LabelTrack> tracks) {
  if (tracks.empty()) throw DataError("merge_expert_labels: no tracks");
  LabelTrack out = tracks.front();
  for (const auto& t : tracks.subspan(1)) {
    if (t.size() != out.size())
      throw DataError("merge_expert_labels: track lengths differ (" +
                      std::to_string(t.size()) + " vs " + std::to_string(out.size()) + ")");
    for (std::size_t n = 0; n < out.size(); ++n)
      out.labels[n] = std::max(out.labels[n], t.labels[n]);
  }
  return out;
}

}  // namespace rarhsmm
