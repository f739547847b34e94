#pragma once

namespace zood {

// Regularized lower incomplete gamma P(a, x).
double gammp(double a, double x);

// CDF of the chi-square distribution with dof degrees of freedom.
double chi2_cdf(int dof, double t);

// Quantile t with P(X <= t) = prob for X ~ chi^2_dof, accurate to 1e-9 relative.
// Throws std::domain_error for dof < 1 or prob outside (0, 1).
double chi2_quantile(int dof, double prob);

// Standard normal CDF.
double normal_cdf(double z);

// Inverse standard normal CDF (Acklam's rational approximation,
// |relative error| < 1.2e-9). Returns -/+infinity at p = 0 / 1.
double inverse_normal_cdf(double p);

}  // namespace zood
