#pragma once

#include <span>

#include "rarhsmm/model.hpp"

namespace rarhsmm {

/// Predicted mean <a, context>. `context` holds the p preceding samples in
/// time order (most recent last); a[j] multiplies the sample j+1 steps back,
/// i.e. context[p-1-j].
double ar_predict(std::span<const double> context, const Vector& a);

// Convenience: prediction for sample n of y (requires n >= a.size()).
double ar_predict_at(std::span<const double> y, std::size_t n, const Vector& a);

/// Log density of the location-scale Student-t distribution.
double gen_t_logpdf(double y, double mean, double sigma, double nu);

/// Posterior mean of the latent precision: (nu + 1) / (nu + r^2 / sigma^2).
double tau_mean(double residual, double sigma, double nu);

/// Posterior mean of log precision:
/// log(omega) + digamma((nu + 1) / 2) - log((nu + 1) / 2).
double tau_mean_log(double residual, double sigma, double nu);

// Emission log-likelihoods for samples p..N-1, one row per modeled sample
// and one column per regime.
Matrix emission_loglik(const ModelParams& model, std::span<const double> y);

}  // namespace rarhsmm
