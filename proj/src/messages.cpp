#include "rarhsmm/messages.hpp"

#include <algorithm>
#include <cmath>

#include "rarhsmm/observation.hpp"
#include "rarhsmm/special.hpp"

namespace rarhsmm {

LogParams LogParams::from(const ModelParams& model) {
  const ModelParams m = renormalized(model);
  LogParams lp;
  lp.log_pi = m.pi.unaryExpr([](double v) { return safe_log(v); });
  lp.log_A = m.A.unaryExpr([](double v) { return safe_log(v); });
  lp.log_lambda.resize(m.K, m.D);
  for (int k = 0; k < m.K; ++k)
    for (int d = 0; d < m.D; ++d)
      lp.log_lambda(k, d) =
          safe_log(m.regimes[static_cast<std::size_t>(k)].lambda[d]);
  return lp;
}

void forward_step(const LogParams& lp, const LogSlice& prev,
                  const Eigen::Ref<const Vector>& emission, LogSlice& next) {
  const auto K = prev.rows();
  const auto D = prev.cols();
  std::vector<double> terms(static_cast<std::size_t>(K));
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index j = 0; j < K; ++j)
      terms[static_cast<std::size_t>(j)] = lp.log_A(j, k) + prev(j, 0);
    const double renewal = log_sum_exp(terms);
    const double e = emission[k];
    for (Eigen::Index d = 0; d + 1 < D; ++d)
      next(k, d) = e + log_add_exp(prev(k, d + 1), lp.log_lambda(k, d) + renewal);
    next(k, D - 1) = e + lp.log_lambda(k, D - 1) + renewal;
  }
}

namespace {

std::size_t choose_stride(std::size_t T, std::size_t cells_per_step,
                          const ForwardOptions& opts) {
  if (opts.stride > 0) return std::min(opts.stride, std::max<std::size_t>(T, 1));
  if (T * cells_per_step <= opts.max_stored_cells) return 1;
  return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(T))));
}

double slice_log_sum(const LogSlice& s) {
  return log_sum_exp(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())));
}

}  // namespace

ForwardResult forward_emissions(const ModelParams& model, Matrix emissions,
                                const ForwardOptions& opts) {
  require_valid(model);
  if (emissions.cols() != model.K)
    throw DataError("emission matrix has " + std::to_string(emissions.cols()) +
                    " columns, model has K = " + std::to_string(model.K));
  if (emissions.rows() == 0) throw DataError("no modeled samples");

  const LogParams lp = LogParams::from(model);
  const auto T = static_cast<std::size_t>(emissions.rows());
  const auto K = model.K;
  const auto D = model.D;

  ForwardResult res;
  res.stride = choose_stride(T, static_cast<std::size_t>(K * D), opts);
  res.log_alpha_end1.resize(static_cast<Eigen::Index>(T), K);

  LogSlice cur(K, D), next(K, D);
  for (int k = 0; k < K; ++k)
    for (int d = 0; d < D; ++d)
      cur(k, d) = lp.log_pi[k] + lp.log_lambda(k, d) + emissions(0, k);

  for (std::size_t t = 0;; ++t) {
    if (t % res.stride == 0) res.checkpoints.push_back(cur);
    res.log_alpha_end1.row(static_cast<Eigen::Index>(t)) = cur.col(0).transpose();
    if (t + 1 == T) break;
    forward_step(lp, cur, emissions.row(static_cast<Eigen::Index>(t + 1)).transpose(), next);
    std::swap(cur, next);
  }
  res.loglik = slice_log_sum(cur);
  res.final_slice = std::move(cur);
  res.emissions = std::move(emissions);
  return res;
}

ForwardResult forward(const ModelParams& model, const Sequence& seq,
                      const ForwardOptions& opts) {
  require_valid(model);
  validate_sequence(seq, model.p);
  return forward_emissions(model, emission_loglik(model, seq.samples), opts);
}

void backward(const ModelParams& model, const ForwardResult& fwd,
              const BackwardVisitor& visit) {
  const LogParams lp = LogParams::from(model);
  const std::size_t T = fwd.steps();
  const auto K = model.K;
  const auto D = model.D;
  if (fwd.emissions.cols() != K || fwd.final_slice.rows() != K ||
      fwd.final_slice.cols() != D)
    throw DataError("forward result does not match the model dimensions");
  if (fwd.checkpoints.size() != (T + fwd.stride - 1) / fwd.stride)
    throw DataError("forward checkpoints do not cover the sequence");

  LogSlice beta = LogSlice::Zero(K, D);
  LogSlice next_beta(K, D);
  std::vector<LogSlice> segment;
  std::vector<double> terms(static_cast<std::size_t>(std::max(K, D)));
  Vector tail(K);

  for (std::size_t c = fwd.checkpoints.size(); c-- > 0;) {
    const std::size_t start = c * fwd.stride;
    const std::size_t end = std::min(start + fwd.stride, T);
    segment.resize(end - start);
    segment[0] = fwd.checkpoints[c];
    for (std::size_t t = start + 1; t < end; ++t) {
      segment[t - start].resize(K, D);
      forward_step(lp, segment[t - start - 1],
                   fwd.emissions.row(static_cast<Eigen::Index>(t)).transpose(),
                   segment[t - start]);
    }

    for (std::size_t t = end; t-- > start;) {
      if (t + 1 < T) {
        const auto e = fwd.emissions.row(static_cast<Eigen::Index>(t + 1));
        // tail(k): probability of the future given a renewal into regime k.
        for (int k = 0; k < K; ++k) {
          for (int d = 0; d < D; ++d)
            terms[static_cast<std::size_t>(d)] = lp.log_lambda(k, d) + beta(k, d);
          tail[k] = e[k] + log_sum_exp(std::span<const double>(terms.data(), static_cast<std::size_t>(D)));
        }
        for (int j = 0; j < K; ++j) {
          for (int k = 0; k < K; ++k)
            terms[static_cast<std::size_t>(k)] = lp.log_A(j, k) + tail[k];
          next_beta(j, 0) = log_sum_exp(std::span<const double>(terms.data(), static_cast<std::size_t>(K)));
          for (int d = 1; d < D; ++d) next_beta(j, d) = e[j] + beta(j, d - 1);
        }
        std::swap(beta, next_beta);
      }
      visit(t, segment[t - start], beta);
    }
  }
}

double loglikelihood(const ModelParams& model, std::span<const Sequence> seqs,
                     const ForwardOptions& opts) {
  if (seqs.empty()) throw DataError("loglikelihood: empty batch");
  double total = 0.0;
  for (const auto& seq : seqs) {
    ForwardOptions lean = opts;
    lean.stride = seq.size();  // a single checkpoint is enough here
    total += forward(model, seq, lean).loglik;
  }
  return total;
}

}  // namespace rarhsmm
