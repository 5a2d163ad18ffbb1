#pragma once

#include <cstdint>
#include <limits>
#include <span>

#include "rarhsmm/model.hpp"

namespace rarhsmm {

/// Counter-based generator: the i-th output of a stream is
/// splitmix64_finalize(key + i * 0x9E3779B97F4A7C15) for i = 1, 2, ...
/// The key of a stream is splitmix64_finalize(parent_key ^
/// splitmix64_finalize(stream_id + 0x9E3779B97F4A7C15)), with the root key
/// derived from the seed the same way (parent_key = seed, stream_id = 0).
/// Every variate below is defined on top of next() so streams can be
/// reproduced outside this library.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  // Independent child stream; does not advance this generator.
  CounterRng split(std::uint64_t stream) const;

  std::uint64_t next();
  result_type operator()() { return next(); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  // (next() >> 11) * 2^-53, in [0, 1).
  double uniform();
  // ((next() >> 11) + 0.5) * 2^-53, in (0, 1).
  double uniform_open();
  // Box-Muller cosine branch: sqrt(-2 log u1) cos(2 pi u2), u1 and u2 open.
  double normal();
  // Marsaglia-Tsang; shape < 1 boosts to shape + 1 and scales by u^(1/shape).
  double gamma(double shape, double rate);
  // Inverse-CDF draw from unnormalized non-negative weights.
  int categorical(std::span<const double> weights);

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct Simulation {
  Sequence sequence;
  HiddenPath path;  // includes the tau draws
};

/// Ancestral sampling. The regime/counter chain starts at sample 0; the
/// first p samples are standard-normal AR context.
Simulation sample_sequence(const ModelParams& model, std::size_t n_samples,
                           std::uint64_t seed);

}  // namespace rarhsmm
