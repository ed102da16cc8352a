#pragma once

// Observed-data likelihood of the selection model, the standard
// random-effects likelihood and its maximum-likelihood baseline fit.

#include <stdexcept>
#include <vector>

#include "rbc/dataset.hpp"

namespace rbc {

// Reparametrized selection-model parameters: mu_i = theta + tau * u_i.
struct CopasParams {
  std::vector<double> mu;
  double rho = 0.0;
  double gamma0 = 0.0;
  double gamma1 = 0.0;
};

// Deviance up to an additive constant:
//   sum_i [ (y_i - mu_i)^2 / s_i^2 + 2 log Phi(gamma0 + gamma1/s_i)
//           - 2 log Phi(v_i) ],
// v_i = {gamma0 + [gamma1 + rho (y_i - mu_i)]/s_i} / sqrt(1 - rho^2).
// Throws std::domain_error when |rho| >= 1 or mu length mismatches.
double copas_deviance(const CopasParams& p, const MetaDataset& d);

// -2 log likelihood of the marginal random-effects model:
//   sum_i [ log(2 pi (s_i^2 + tau^2)) + (y_i - theta)^2 / (s_i^2 + tau^2) ].
double re_neg2_loglik(double theta, double tau, const MetaDataset& d);

struct SmaFit {
  double theta_hat = 0.0;
  double tau_hat = 0.0;
  double se_theta = 0.0;
  double ci_lo = 0.0;  // theta_hat - 1.96 se
  double ci_hi = 0.0;  // theta_hat + 1.96 se
  double loglik = 0.0;
};

class FitError : public std::runtime_error {
 public:
  FitError(const std::string& msg, SmaFit best)
      : std::runtime_error(msg), best_iterate(best) {}
  SmaFit best_iterate;
};

// Maximum-likelihood fit of (theta, tau) over R x [0, inf): Nelder-Mead over
// (theta, log tau) with a tau = 0 boundary check, standard error from the
// central-difference Hessian at the optimum. Requires n >= 2; throws
// FitError carrying the best iterate if the evaluation cap is hit without
// convergence.
SmaFit fit_sma(const MetaDataset& d);

}  // namespace rbc
