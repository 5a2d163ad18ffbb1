#include "rarhsmm/inference.hpp"

#include "rarhsmm/messages.hpp"
#include "rarhsmm/observation.hpp"
#include "rarhsmm/special.hpp"

namespace rarhsmm {

ViterbiResult viterbi_emissions(const ModelParams& model, const Matrix& emissions) {
  require_valid(model);
  if (emissions.cols() != model.K)
    throw DataError("emission matrix does not match K");
  const auto T = static_cast<std::size_t>(emissions.rows());
  if (T == 0) throw DataError("no modeled samples");

  const LogParams lp = LogParams::from(model);
  const int K = model.K;
  const int D = model.D;
  const auto cells = static_cast<std::size_t>(K) * static_cast<std::size_t>(D);

  // renewed[(t*K + k)*D + d]: state (k, d) at t was entered by a renewal.
  std::vector<bool> renewed(T * cells, false);
  std::vector<int> best_from(T * static_cast<std::size_t>(K), -1);

  LogSlice delta(K, D), next(K, D);
  for (int k = 0; k < K; ++k)
    for (int d = 0; d < D; ++d)
      delta(k, d) = lp.log_pi[k] + lp.log_lambda(k, d) + emissions(0, k);

  for (std::size_t t = 1; t < T; ++t) {
    for (int k = 0; k < K; ++k) {
      int from = 0;
      double best = kNegInf;
      for (int j = 0; j < K; ++j) {
        const double v = lp.log_A(j, k) + delta(j, 0);
        if (v > best) {
          best = v;
          from = j;
        }
      }
      best_from[t * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)] = from;
      const double e = emissions(static_cast<Eigen::Index>(t), k);
      const std::size_t base = (t * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)) *
                               static_cast<std::size_t>(D);
      for (int d = 0; d < D; ++d) {
        const double renew = lp.log_lambda(k, d) + best;
        bool take_renewal = true;
        if (d + 1 < D) {
          const double stay = delta(k, d + 1);
          // The renewal predecessor (from, 1) orders before (k, d+2) iff from <= k.
          take_renewal = renew > stay || (renew == stay && from <= k);
        }
        renewed[base + static_cast<std::size_t>(d)] = take_renewal;
        next(k, d) = e + (take_renewal ? renew : delta(k, d + 1));
      }
    }
    std::swap(delta, next);
  }

  int k_best = 0, d_best = 0;
  double best = kNegInf;
  for (int k = 0; k < K; ++k)
    for (int d = 0; d < D; ++d)
      if (delta(k, d) > best) {
        best = delta(k, d);
        k_best = k;
        d_best = d;
      }

  ViterbiResult out;
  out.log_prob = best;
  out.path.z.assign(T, 0);
  out.path.d.assign(T, 1);
  int k = k_best, d = d_best;
  for (std::size_t t = T; t-- > 0;) {
    out.path.z[t] = k;
    out.path.d[t] = d + 1;
    if (t == 0) break;
    const std::size_t idx = (t * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)) *
                                static_cast<std::size_t>(D) + static_cast<std::size_t>(d);
    if (renewed[idx]) {
      k = best_from[t * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)];
      d = 0;
    } else {
      d = d + 1;
    }
  }
  return out;
}

ViterbiResult viterbi(const ModelParams& model, const Sequence& seq) {
  require_valid(model);
  validate_sequence(seq, model.p);
  ViterbiResult res = viterbi_emissions(model, emission_loglik(model, seq.samples));
  const auto p = static_cast<std::size_t>(model.p);
  if (p == 0) return res;
  // Context samples take the first decoded regime and keep counting down.
  HiddenPath full;
  full.z.assign(p, res.path.z.front());
  full.d.resize(p);
  for (std::size_t n = 0; n < p; ++n)
    full.d[n] = res.path.d.front() + static_cast<int>(p - n);
  full.z.insert(full.z.end(), res.path.z.begin(), res.path.z.end());
  full.d.insert(full.d.end(), res.path.d.begin(), res.path.d.end());
  res.path = std::move(full);
  return res;
}

LabelTrack labels_from_path(const HiddenPath& path, double sample_rate) {
  return LabelTrack{path.z, sample_rate};
}

}  // namespace rarhsmm
