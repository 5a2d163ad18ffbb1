#include "rarhsmm/observation.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "rarhsmm/special.hpp"

namespace rarhsmm {

namespace {

void check_scale(double sigma, double nu) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
  if (!(nu > 0.0)) throw std::invalid_argument("nu must be > 0");
}

}  // namespace

double ar_predict(std::span<const double> context, const Vector& a) {
  const auto p = static_cast<std::size_t>(a.size());
  if (context.size() != p)
    throw std::invalid_argument("ar_predict: context has " +
                                std::to_string(context.size()) +
                                " samples, expected " + std::to_string(p));
  double mean = 0.0;
  for (std::size_t j = 0; j < p; ++j)
    mean += a[static_cast<Eigen::Index>(j)] * context[p - 1 - j];
  return mean;
}

double ar_predict_at(std::span<const double> y, std::size_t n, const Vector& a) {
  const auto p = static_cast<std::size_t>(a.size());
  return ar_predict(y.subspan(n - p, p), a);
}

double gen_t_logpdf(double y, double mean, double sigma, double nu) {
  check_scale(sigma, nu);
  const double z = (y - mean) / sigma;
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(nu * std::numbers::pi) - std::log(sigma) -
         0.5 * (nu + 1.0) * std::log1p(z * z / nu);
}

double tau_mean(double residual, double sigma, double nu) {
  check_scale(sigma, nu);
  const double z = residual / sigma;
  return (nu + 1.0) / (nu + z * z);
}

double tau_mean_log(double residual, double sigma, double nu) {
  const double half = 0.5 * (nu + 1.0);
  return std::log(tau_mean(residual, sigma, nu)) + digamma(half) -
         std::log(half);
}

Matrix emission_loglik(const ModelParams& model, std::span<const double> y) {
  const auto p = static_cast<std::size_t>(model.p);
  if (y.size() <= p)
    throw DataError("sequence too short for AR order " + std::to_string(p));
  const auto T = static_cast<Eigen::Index>(y.size() - p);
  Matrix out(T, model.K);
  for (int k = 0; k < model.K; ++k) {
    const auto& r = model.regimes[static_cast<std::size_t>(k)];
    check_scale(r.sigma, r.nu);
    const double norm = std::lgamma(0.5 * (r.nu + 1.0)) -
                        std::lgamma(0.5 * r.nu) -
                        0.5 * std::log(r.nu * std::numbers::pi) -
                        std::log(r.sigma);
    const double scale = 1.0 / (r.nu * r.sigma * r.sigma);
    for (Eigen::Index t = 0; t < T; ++t) {
      const std::size_t n = p + static_cast<std::size_t>(t);
      const double resid = y[n] - ar_predict_at(y, n, r.a);
      out(t, k) = norm - 0.5 * (r.nu + 1.0) * std::log1p(resid * resid * scale);
    }
  }
  return out;
}

}  // namespace rarhsmm
