#include "rarhsmm/learning.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>
#include <ostream>

#include "rarhsmm/observation.hpp"
#include "rarhsmm/special.hpp"

namespace rarhsmm {

namespace {

// Fills omega/elogtau for every sample; context rows get the prior moments
// E[tau] = 1 and E[log tau] = digamma(nu/2) - log(nu/2).
void fill_precision_moments(const ModelParams& model, std::span<const double> y,
                            SuffStats& st) {
  const auto N = static_cast<Eigen::Index>(y.size());
  const auto p = static_cast<std::size_t>(model.p);
  st.omega.resize(N, model.K);
  st.elogtau.resize(N, model.K);
  for (int k = 0; k < model.K; ++k) {
    const auto& r = model.regimes[static_cast<std::size_t>(k)];
    const double prior_log = digamma(0.5 * r.nu) - std::log(0.5 * r.nu);
    const double shift = digamma(0.5 * (r.nu + 1.0)) - std::log(0.5 * (r.nu + 1.0));
    for (Eigen::Index n = 0; n < N; ++n) {
      const auto un = static_cast<std::size_t>(n);
      if (un < p) {
        st.omega(n, k) = 1.0;
        st.elogtau(n, k) = prior_log;
        continue;
      }
      const double resid = y[un] - ar_predict_at(y, un, r.a);
      const double w = tau_mean(resid, r.sigma, r.nu);
      st.omega(n, k) = w;
      st.elogtau(n, k) = std::log(w) + shift;
    }
  }
}

void add_flag(std::vector<std::string>& flags, std::string flag) {
  if (std::find(flags.begin(), flags.end(), flag) == flags.end())
    flags.push_back(std::move(flag));
}

}  // namespace

SuffStats e_step(const ModelParams& model, const Sequence& seq,
                 const ForwardOptions& opts) {
  const ForwardResult fwd = forward(model, seq, opts);
  const LogParams lp = LogParams::from(model);
  const int K = model.K;
  const int D = model.D;
  const auto p = static_cast<Eigen::Index>(model.p);
  const auto N = static_cast<Eigen::Index>(seq.size());
  const double ll = fwd.loglik;

  SuffStats st;
  st.context = static_cast<std::size_t>(p);
  st.loglik = ll;
  st.gamma.resize(N, K);
  st.xi_agg = Matrix::Zero(K, K);
  st.dur_stats = Matrix::Zero(K, D);

  std::vector<double> scratch(static_cast<std::size_t>(std::max(K, D)));
  Vector into_renewal(K);

  backward(model, fwd, [&](std::size_t t, const LogSlice& alpha, const LogSlice& beta) {
    const auto row = p + static_cast<Eigen::Index>(t);
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
      double g = 0.0;
      for (int d = 0; d < D; ++d) g += std::exp(alpha(k, d) + beta(k, d) - ll);
      st.gamma(row, k) = g;
      total += g;
    }
    st.gamma.row(row) /= total;

    if (t == 0) {
      for (int k = 0; k < K; ++k)
        for (int d = 0; d < D; ++d)
          st.dur_stats(k, d) += std::exp(alpha(k, d) + beta(k, d) - ll);
      return;
    }

    const auto prev_end = fwd.log_alpha_end1.row(static_cast<Eigen::Index>(t - 1));
    const auto e = fwd.emissions.row(static_cast<Eigen::Index>(t));
    for (int k = 0; k < K; ++k) {
      for (int j = 0; j < K; ++j)
        scratch[static_cast<std::size_t>(j)] = prev_end[j] + lp.log_A(j, k);
      const double renewal_in =
          log_sum_exp(std::span<const double>(scratch.data(), static_cast<std::size_t>(K)));

      for (int d = 0; d < D; ++d)
        scratch[static_cast<std::size_t>(d)] = lp.log_lambda(k, d) + beta(k, d);
      const double future =
          log_sum_exp(std::span<const double>(scratch.data(), static_cast<std::size_t>(D)));

      const double base = renewal_in + e[k] - ll;
      if (base != kNegInf)
        for (int d = 0; d < D; ++d)
          st.dur_stats(k, d) += std::exp(base + scratch[static_cast<std::size_t>(d)]);
      for (int j = 0; j < K; ++j)
        st.xi_agg(j, k) += std::exp(prev_end[j] + lp.log_A(j, k) + e[k] + future - ll);
    }
  });

  for (Eigen::Index n = 0; n < p; ++n) st.gamma.row(n) = st.gamma.row(p);
  fill_precision_moments(model, seq.samples, st);
  return st;
}

ArDesign ar_design(std::span<const double> y, int p) {
  const auto up = static_cast<std::size_t>(p);
  if (p < 0 || y.size() <= up) throw DataError("ar_design: need more than p samples");
  const auto rows = static_cast<Eigen::Index>(y.size() - up);
  ArDesign out{Matrix(rows, p), Vector(rows)};
  for (Eigen::Index i = 0; i < rows; ++i) {
    const std::size_t n = up + static_cast<std::size_t>(i);
    out.y[i] = y[n];
    for (int j = 0; j < p; ++j) out.X(i, j) = y[n - 1 - static_cast<std::size_t>(j)];
  }
  return out;
}

WlsResult weighted_least_squares(const Matrix& design, const Vector& targets,
                                 const Vector& weights) {
  const auto rows = design.rows();
  const auto p = design.cols();
  if (targets.size() != rows || weights.size() != rows)
    throw DataError("weighted_least_squares: row count mismatch");
  const auto positive = (weights.array() > 0.0).count();
  if (positive < p)
    throw DataError("weighted_least_squares: " + std::to_string(positive) +
                    " positively weighted rows for " + std::to_string(p) +
                    " unknowns");
  WlsResult out;
  if (p == 0) {
    out.a = Vector(0);
    return out;
  }
  const Matrix wx = weights.asDiagonal() * design;
  const Vector wy = weights.cwiseProduct(targets);
  Eigen::ColPivHouseholderQR<Matrix> qr(wx);
  if (qr.rank() == p) {
    out.a = qr.solve(wy);
    return out;
  }
  Matrix aug(rows + p, p);
  aug << wx, std::sqrt(1e-8) * Matrix::Identity(p, p);
  Vector rhs(rows + p);
  rhs << wy, Vector::Zero(p);
  out.a = aug.colPivHouseholderQr().solve(rhs);
  out.ridge = true;
  return out;
}

std::optional<double> update_sigma(const Vector& gamma, const Vector& omega,
                                   const Vector& residuals) {
  const double den = gamma.sum();
  if (!(den > 0.0)) return std::nullopt;
  const double num =
      (gamma.array() * omega.array() * residuals.array().square()).sum();
  return std::sqrt(num / den);
}

double nu_equation(double nu, double data_term, double nu_prev) {
  const double half_prev = 0.5 * (nu_prev + 1.0);
  return 1.0 + data_term - digamma(0.5 * nu) + std::log(0.5 * nu) +
         digamma(half_prev) - std::log(half_prev);
}

NuSolution solve_nu(const Vector& gamma, const Vector& omega, double nu_prev) {
  if (!(nu_prev > 0.0)) throw std::invalid_argument("solve_nu: nu_prev must be > 0");
  const double mass = gamma.sum();
  if (!(mass > 0.0)) throw DataError("solve_nu: zero posterior mass");
  const double data_term =
      (gamma.array() * (omega.array().log() - omega.array())).sum() / mass;

  // digamma(x) - log(x) increases, so the equation decreases in nu.
  auto f = [&](double nu) { return nu_equation(nu, data_term, nu_prev); };
  double lo = kNuLower, hi = kNuUpper;
  const double f_lo = f(lo), f_hi = f(hi);
  if (f_lo <= 0.0) return {lo, f_lo, f_lo < 0.0};
  if (f_hi >= 0.0) return {hi, f_hi, f_hi > 0.0};

  // Bisect in log(nu) until the bracket collapses to rounding level.
  double mid = lo, f_mid = f_lo;
  for (int it = 0; it < 200; ++it) {
    mid = std::sqrt(lo * hi);
    f_mid = f(mid);
    if (f_mid == 0.0) break;
    if (f_mid > 0.0) lo = mid; else hi = mid;
    if (hi - lo <= 1e-15 * mid) break;
  }
  return {mid, f_mid, false};
}

MStepResult m_step(std::span<const SuffStats> stats, std::span<const Sequence> seqs,
                   const ModelParams& prev, const MStepOptions& opts) {
  require_valid(prev);
  if (stats.size() != seqs.size() || stats.empty())
    throw DataError("m_step: need one statistics block per sequence");
  const int K = prev.K;
  const int D = prev.D;
  const int p = prev.p;

  MStepResult res;
  ModelParams& m = res.model;
  m = prev;

  Vector pi = Vector::Zero(K);
  Matrix xi = Matrix::Zero(K, K);
  Matrix dur = Matrix::Zero(K, D);
  for (const auto& s : stats) {
    if (s.gamma.cols() != K || s.dur_stats.cols() != D ||
        s.context != static_cast<std::size_t>(p))
      throw DataError("m_step: statistics do not match the model dimensions");
    pi += s.gamma.row(p).transpose();
    xi += s.xi_agg;
    dur += s.dur_stats;
  }
  m.pi = pi / pi.sum();

  for (int j = 0; j < K; ++j) {
    const double row_sum = xi.row(j).sum();
    if (row_sum > 0.0) {
      m.A.row(j) = xi.row(j) / row_sum;
    } else {
      add_flag(res.flags, "A row " + std::to_string(j) + " frozen (no expected exits)");
    }
  }

  for (int k = 0; k < K; ++k) {
    Vector lam = dur.row(k).transpose().array() + opts.lambda_smoothing;
    m.regimes[static_cast<std::size_t>(k)].lambda = lam / lam.sum();
  }

  // Stack the AR regression rows of all sequences once.
  std::vector<ArDesign> designs;
  Eigen::Index total_rows = 0;
  for (const auto& seq : seqs) {
    designs.push_back(ar_design(seq.samples, p));
    total_rows += designs.back().y.size();
  }
  Matrix X(total_rows, p);
  Vector y(total_rows);
  {
    Eigen::Index at = 0;
    for (const auto& d : designs) {
      X.middleRows(at, d.y.size()) = d.X;
      y.segment(at, d.y.size()) = d.y;
      at += d.y.size();
    }
  }

  for (int k = 0; k < K; ++k) {
    auto& reg = m.regimes[static_cast<std::size_t>(k)];
    const auto& old = prev.regimes[static_cast<std::size_t>(k)];
    const std::string tag = "regime " + std::to_string(k);

    Vector g(total_rows), w(total_rows);
    Eigen::Index at = 0;
    for (const auto& s : stats) {
      const auto rows = s.gamma.rows() - p;
      g.segment(at, rows) = s.gamma.col(k).tail(rows);
      w.segment(at, rows) = s.omega.col(k).tail(rows);
      at += rows;
    }
    g = g.cwiseMax(0.0);

    if (g.sum() < opts.min_regime_mass) {
      reg.a = old.a;
      reg.sigma = old.sigma;
      reg.nu = old.nu;
      add_flag(res.flags, tag + " emission frozen (posterior mass below threshold)");
      continue;
    }

    try {
      const Vector sw = (g.array() * w.array()).sqrt();
      WlsResult wls = weighted_least_squares(X, y, sw);
      if (wls.ridge) add_flag(res.flags, tag + " AR ridge");
      reg.a = wls.a;
    } catch (const DataError&) {
      reg.a = old.a;
      reg.sigma = old.sigma;
      reg.nu = old.nu;
      add_flag(res.flags, tag + " emission frozen (too few weighted rows)");
      continue;
    }

    const Vector resid = y - X * reg.a;
    const auto sigma = update_sigma(g, w, resid);
    if (!sigma) {
      reg.sigma = old.sigma;
      add_flag(res.flags, tag + " sigma frozen");
    } else if (*sigma < opts.min_sigma) {
      reg.sigma = opts.min_sigma;
      add_flag(res.flags, tag + " sigma floored");
    } else {
      reg.sigma = *sigma;
    }

    const NuSolution nu = solve_nu(g, w, old.nu);
    reg.nu = nu.nu;
    if (nu.clamped) add_flag(res.flags, tag + " nu clamped");
  }

  require_valid(m);
  return res;
}

FitResult em_fit(std::span<const Sequence> seqs, const ModelParams& init,
                 const EmOptions& opts) {
  require_valid(init);
  if (seqs.empty()) throw DataError("em_fit: empty batch");
  for (const auto& s : seqs) validate_sequence(s, init.p);

  FitResult fit;
  fit.model = init;
  MStepOptions mopts;
  mopts.min_sigma = opts.min_sigma;
  std::vector<std::string> pending;
  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(opts.threads, 1)), 1, seqs.size());

  for (int iter = 0;; ++iter) {
    std::vector<SuffStats> stats(seqs.size());
    if (workers == 1) {
      for (std::size_t i = 0; i < seqs.size(); ++i)
        stats[i] = e_step(fit.model, seqs[i], opts.forward);
    } else {
      std::vector<std::future<void>> jobs;
      for (std::size_t w = 0; w < workers; ++w) {
        jobs.push_back(std::async(std::launch::async, [&, w] {
          for (std::size_t i = w; i < seqs.size(); i += workers)
            stats[i] = e_step(fit.model, seqs[i], opts.forward);
        }));
      }
      for (auto& j : jobs) j.get();
    }

    double ll = 0.0;
    for (const auto& s : stats) ll += s.loglik;

    IterationRecord rec;
    rec.iteration = iter;
    rec.loglik = ll;
    rec.flags = std::move(pending);
    pending.clear();
    if (!fit.trace.empty()) {
      const double prev = fit.trace.back();
      rec.rel_change = (ll - prev) / std::abs(prev);
      if (ll < prev - 1e-6) rec.flags.push_back("loglik decreased");
    }
    fit.trace.push_back(ll);
    fit.log.push_back(rec);

    if (iter > 0 && rec.rel_change < opts.rel_tol) {
      fit.converged = true;
      break;
    }
    if (iter >= opts.max_iters) break;

    MStepResult next = m_step(stats, seqs, fit.model, mopts);
    fit.model = std::move(next.model);
    pending = std::move(next.flags);
  }
  return fit;
}

void write_fit_log(std::ostream& out, std::span<const IterationRecord> log) {
  out << "iteration,loglik,rel_change,flags\n";
  const auto old_precision = out.precision(17);
  for (const auto& r : log) {
    out << r.iteration << ',' << r.loglik << ',' << r.rel_change << ',';
    for (std::size_t i = 0; i < r.flags.size(); ++i)
      out << (i ? ";" : "") << r.flags[i];
    out << '\n';
  }
  out.precision(old_precision);
}

SuffStats dirac_stats(const ModelParams& model, const Sequence& seq,
                      const LabelTrack& labels, bool* clipped) {
  const int K = model.K;
  const int D = model.D;
  const auto p = static_cast<std::size_t>(model.p);
  const std::size_t N = seq.size();
  if (labels.size() != N)
    throw DataError("label track has " + std::to_string(labels.size()) +
                    " samples, sequence has " + std::to_string(N));
  validate_sequence(seq, model.p);

  SuffStats st;
  st.context = p;
  st.gamma = Matrix::Zero(static_cast<Eigen::Index>(N), K);
  st.xi_agg = Matrix::Zero(K, K);
  st.dur_stats = Matrix::Zero(K, D);
  for (std::size_t n = 0; n < N; ++n) {
    const int k = labels.labels[std::max(n, p)];
    if (k < 0 || k >= K)
      throw DataError("label " + std::to_string(k) + " at sample " +
                      std::to_string(n) + " outside [0, K)");
    st.gamma(static_cast<Eigen::Index>(n), k) = 1.0;
  }

  int prev_label = -1;
  for (std::size_t start = p; start < N;) {
    const int k = labels.labels[start];
    std::size_t end = start;
    while (end < N && labels.labels[end] == k) ++end;
    const auto len = static_cast<int>(end - start);
    const bool censored = end == N;
    if (prev_label >= 0) st.xi_agg(prev_label, k) += 1.0;
    if (len > D && clipped) *clipped = true;

    int remaining = len;
    bool first_piece = true;
    while (remaining > 0) {
      const int piece = std::min(remaining, D);
      remaining -= piece;
      if (!first_piece) st.xi_agg(k, k) += 1.0;
      first_piece = false;
      // A piece that stops at the end of the data may have continued,
      // unless it already has the maximum duration.
      const bool last = remaining == 0;
      if (!(censored && last && piece < D)) st.dur_stats(k, piece - 1) += 1.0;
    }
    prev_label = k;
    start = end;
  }

  fill_precision_moments(model, seq.samples, st);
  return st;
}

SupervisedResult supervised_fit(std::span<const Sequence> seqs,
                                std::span<const LabelTrack> labels,
                                const SupervisedOptions& opts) {
  if (seqs.empty()) throw DataError("supervised_fit: empty batch");
  if (seqs.size() != labels.size())
    throw DataError("supervised_fit: one label track per sequence required");
  if (opts.K < 1 || opts.p < 0 || opts.D < 1)
    throw DataError("supervised_fit: invalid K, p or D");

  std::vector<bool> present(static_cast<std::size_t>(opts.K), false);
  double sum = 0.0, sum_sq = 0.0, count = 0.0;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    validate_sequence(seqs[s], opts.p);
    if (labels[s].size() != seqs[s].size())
      throw DataError("label track " + std::to_string(s) + " has " +
                      std::to_string(labels[s].size()) + " samples, sequence has " +
                      std::to_string(seqs[s].size()));
    for (std::size_t n = static_cast<std::size_t>(opts.p); n < seqs[s].size(); ++n) {
      const int k = labels[s].labels[n];
      if (k < 0 || k >= opts.K)
        throw DataError("label " + std::to_string(k) + " outside [0, K)");
      present[static_cast<std::size_t>(k)] = true;
    }
    for (double v : seqs[s].samples) {
      sum += v;
      sum_sq += v * v;
      count += 1.0;
    }
  }
  for (int k = 0; k < opts.K; ++k)
    if (!present[static_cast<std::size_t>(k)])
      throw DataError("regime " + std::to_string(k) + " absent from labels");

  const double mean = sum / count;
  const double spread = std::sqrt(std::max(sum_sq / count - mean * mean, 0.0));

  ModelParams model;
  model.K = opts.K;
  model.p = opts.p;
  model.D = opts.D;
  model.sample_rate = seqs[0].sample_rate;
  model.pi = Vector::Constant(opts.K, 1.0 / opts.K);
  model.A = Matrix::Constant(opts.K, opts.K, 1.0 / opts.K);
  for (int k = 0; k < opts.K; ++k)
    model.regimes.push_back({Vector::Zero(opts.p), spread > 0.0 ? spread : 1.0,
                             opts.initial_nu, Vector::Constant(opts.D, 1.0 / opts.D)});

  SupervisedResult res;
  bool clipped = false;
  std::vector<SuffStats> stats(seqs.size());
  std::vector<std::string> last_flags;
  for (int it = 0; it < opts.max_inner_iters; ++it) {
    for (std::size_t s = 0; s < seqs.size(); ++s)
      stats[s] = dirac_stats(model, seqs[s], labels[s], &clipped);
    MStepResult next = m_step(stats, seqs, model, opts.mstep);
    last_flags = std::move(next.flags);
    bool stable = it > 0;
    for (int k = 0; k < opts.K; ++k) {
      const double before = model.regimes[static_cast<std::size_t>(k)].sigma;
      const double after = next.model.regimes[static_cast<std::size_t>(k)].sigma;
      if (std::abs(after - before) > opts.sigma_rel_tol * before) stable = false;
    }
    model = std::move(next.model);
    res.inner_iterations = it + 1;
    if (stable) break;
  }
  if (res.inner_iterations == opts.max_inner_iters)
    add_flag(res.flags, "inner loop hit max_inner_iters");
  if (clipped) add_flag(res.flags, "runs longer than D were split at D");
  for (auto& f : last_flags) add_flag(res.flags, std::move(f));
  res.model = std::move(model);
  return res;
}

ModelParams default_unsupervised_init(std::span<const Sequence> seqs,
                                      const InitConfig& config) {
  if (seqs.empty()) throw DataError("default_unsupervised_init: empty batch");
  if (config.p < 2)
    throw DataError("default_unsupervised_init: the resonator needs p >= 2");
  const Sequence& first = seqs[0];
  const double rate = first.sample_rate;
  const int D = std::max(1, static_cast<int>(std::lround(config.duration_seconds * rate)));
  const auto window = static_cast<std::size_t>(std::lround(config.seed_seconds * rate));
  if (first.size() < window || window <= static_cast<std::size_t>(2 * config.p))
    throw DataError("sequence shorter than the seed window (" +
                    std::to_string(window) + " samples)");

  const ArDesign seed = ar_design(std::span<const double>(first.samples).first(window), config.p);
  const Vector a0 =
      weighted_least_squares(seed.X, seed.y, Vector::Ones(seed.y.size())).a;
  const Vector resid = seed.y - seed.X * a0;
  const double sigma0 = std::max(std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size())), 1e-6);

  const double w0 = 2.0 * std::numbers::pi * config.resonance_hz / rate;
  Vector a1 = Vector::Zero(config.p);
  a1[0] = 2.0 * config.pole_radius * std::cos(w0);
  a1[1] = -config.pole_radius * config.pole_radius;

  Vector lam1(D);
  for (int d = 0; d < D; ++d) {
    const double z = ((d + 1) / rate - config.spindle_mean_seconds) / config.spindle_sd_seconds;
    lam1[d] = std::exp(-0.5 * z * z);
  }
  if (!(lam1.sum() > 0.0)) lam1.setOnes();
  lam1 /= lam1.sum();

  ModelParams m;
  m.K = 2;
  m.p = config.p;
  m.D = D;
  m.sample_rate = rate;
  m.pi = Vector(2);
  m.pi << 1.0, 0.0;
  m.A = Matrix(2, 2);
  m.A << 0.5, 0.5, 1.0, 0.0;
  m.regimes.push_back({a0, sigma0, config.initial_nu, Vector::Constant(D, 1.0 / D)});
  m.regimes.push_back({a1, sigma0, config.initial_nu, lam1});
  require_valid(m);
  return m;
}

}  // namespace rarhsmm
