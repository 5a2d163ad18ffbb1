#include "rarhsmm/simulate.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rarhsmm/observation.hpp"

namespace rarhsmm {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::vector<double> row_weights(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}
}  // namespace

std::uint64_t CounterRng::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix(seed ^ mix(stream + kGolden))) {}

CounterRng CounterRng::split(std::uint64_t stream) const {
  return CounterRng(key_, stream);
}

std::uint64_t CounterRng::next() { return mix(key_ + (++counter_) * kGolden); }

double CounterRng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double CounterRng::uniform_open() {
  return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform_open();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double CounterRng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw std::invalid_argument("gamma: shape and rate must be > 0");
  if (shape < 1.0) {
    const double boosted = gamma(shape + 1.0, 1.0);
    return boosted * std::pow(uniform_open(), 1.0 / shape) / rate;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v))
      return d * v / rate;
  }
}

int CounterRng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("categorical: no mass");
  const double target = uniform() * total;
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    acc += weights[i];
    if (target < acc) return last_positive;
  }
  return last_positive;
}

Simulation sample_sequence(const ModelParams& model, std::size_t n_samples,
                           std::uint64_t seed) {
  require_valid(model);
  const auto p = static_cast<std::size_t>(model.p);
  if (n_samples <= p)
    throw DataError("n_samples must exceed the AR order");

  const CounterRng root(seed);
  CounterRng chain = root.split(1);
  CounterRng precision = root.split(2);
  CounterRng noise = root.split(3);
  CounterRng context = root.split(4);

  const auto pi = row_weights(model.pi);
  std::vector<std::vector<double>> A_rows, lambdas;
  for (int k = 0; k < model.K; ++k) {
    A_rows.push_back(row_weights(model.A.row(k).transpose()));
    lambdas.push_back(row_weights(model.regimes[static_cast<std::size_t>(k)].lambda));
  }

  Simulation sim;
  sim.sequence.sample_rate = model.sample_rate;
  auto& y = sim.sequence.samples;
  y.resize(n_samples);
  auto& z = sim.path.z;
  auto& d = sim.path.d;
  z.resize(n_samples);
  d.resize(n_samples);
  std::vector<double> tau(n_samples);

  for (std::size_t n = 0; n < n_samples; ++n) {
    if (n == 0) {
      z[n] = chain.categorical(pi);
      d[n] = 1 + chain.categorical(lambdas[static_cast<std::size_t>(z[n])]);
    } else if (d[n - 1] > 1) {
      z[n] = z[n - 1];
      d[n] = d[n - 1] - 1;
    } else {
      z[n] = chain.categorical(A_rows[static_cast<std::size_t>(z[n - 1])]);
      d[n] = 1 + chain.categorical(lambdas[static_cast<std::size_t>(z[n])]);
    }
    const auto& r = model.regimes[static_cast<std::size_t>(z[n])];
    tau[n] = precision.gamma(0.5 * r.nu, 0.5 * r.nu);
    if (n < p) {
      y[n] = context.normal();
    } else {
      const double mean = ar_predict_at(y, n, r.a);
      y[n] = mean + r.sigma * noise.normal() / std::sqrt(tau[n]);
    }
  }
  sim.path.tau = std::move(tau);
  return sim;
}

}  // namespace rarhsmm
