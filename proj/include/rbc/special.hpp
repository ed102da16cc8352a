#pragma once

// Scalar special functions shared by the likelihood, sampler and density code.

#include <functional>

namespace rbc {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;
inline constexpr double kSqrt2Pi = 2.5066282746310005024157652848110;

// Standard normal density / log-density.
double norm_pdf(double x);
double norm_logpdf(double x);

// Standard normal CDF.
double norm_cdf(double x);

// log(Phi(x)), stable deep in the lower tail. Uses erfc for x >= -8 and the
// asymptotic expansion of the Mills ratio below that, so arguments like -200
// return a finite value instead of -inf.
double log_norm_cdf(double x);

// Hazard (inverse Mills ratio) of the standard normal: phi(a) / (1 - Phi(a)).
double norm_hazard(double a);

// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
double gamma_p(double a, double x);

// Adaptive Simpson quadrature of f over [a, b] with absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol, int max_depth = 40);

}  // namespace rbc
