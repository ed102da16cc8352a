#include "rbc/likelihood.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>

#include "rbc/special.hpp"

namespace rbc {

double copas_deviance(const CopasParams& p, const MetaDataset& d) {
  const std::size_t n = d.size();
  if (p.mu.size() != n) {
    throw std::domain_error("copas_deviance: mu length != dataset size");
  }
  if (!(std::abs(p.rho) < 1.0)) {
    throw std::domain_error("copas_deviance: |rho| must be < 1");
  }
  const double denom = std::sqrt(1.0 - p.rho * p.rho);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double resid = d.y(i) - p.mu[i];
    const double s = d.s(i);
    const double select = p.gamma0 + p.gamma1 / s;
    const double v = (p.gamma0 + (p.gamma1 + p.rho * resid) / s) / denom;
    acc += resid * resid / (s * s) + 2.0 * log_norm_cdf(select) -
           2.0 * log_norm_cdf(v);
  }
  return acc;
}

double re_neg2_loglik(double theta, double tau, const MetaDataset& d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double var = d.s(i) * d.s(i) + tau * tau;
    const double resid = d.y(i) - theta;
    acc += std::log(2.0 * M_PI * var) + resid * resid / var;
  }
  return acc;
}

namespace {

constexpr int kMaxEvals = 10000;
constexpr double kObjTol = 1e-10;

double weighted_mean(const MetaDataset& d, double tau) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double w = 1.0 / (d.s(i) * d.s(i) + tau * tau);
    num += w * d.y(i);
    den += w;
  }
  return num / den;
}

// Two-parameter Nelder-Mead with standard reflection/expansion/contraction
// coefficients. Small enough here that a hand-rolled simplex beats pulling
// in an optimization library.
struct Simplex2Result {
  std::array<double, 2> x;
  double fx;
  bool converged;
  int evals;
};

Simplex2Result nelder_mead_2d(
    const std::function<double(const std::array<double, 2>&)>& f,
    std::array<double, 2> start, double scale0, double scale1, int max_evals) {
  std::array<std::array<double, 2>, 3> pts = {
      start,
      {start[0] + scale0, start[1]},
      {start[0], start[1] + scale1}};
  std::array<double, 3> vals;
  int evals = 0;
  for (int i = 0; i < 3; ++i) {
    vals[i] = f(pts[i]);
    ++evals;
  }
  bool converged = false;
  while (evals < max_evals) {
    std::array<int, 3> order = {0, 1, 2};
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return vals[a] < vals[b]; });
    const int best = order[0], mid = order[1], worst = order[2];
    if (std::abs(vals[worst] - vals[best]) <=
        kObjTol * (std::abs(vals[best]) + kObjTol)) {
      converged = true;
      break;
    }
    const std::array<double, 2> centroid = {
        0.5 * (pts[best][0] + pts[mid][0]),
        0.5 * (pts[best][1] + pts[mid][1])};
    const auto blend = [&](double coef) {
      return std::array<double, 2>{
          centroid[0] + coef * (pts[worst][0] - centroid[0]),
          centroid[1] + coef * (pts[worst][1] - centroid[1])};
    };
    const auto reflected = blend(-1.0);
    const double fr = f(reflected);
    ++evals;
    if (fr < vals[best]) {
      const auto expanded = blend(-2.0);
      const double fe = f(expanded);
      ++evals;
      if (fe < fr) {
        pts[worst] = expanded;
        vals[worst] = fe;
      } else {
        pts[worst] = reflected;
        vals[worst] = fr;
      }
    } else if (fr < vals[mid]) {
      pts[worst] = reflected;
      vals[worst] = fr;
    } else {
      const auto contracted = blend(fr < vals[worst] ? -0.5 : 0.5);
      const double fc = f(contracted);
      ++evals;
      if (fc < std::min(fr, vals[worst])) {
        pts[worst] = contracted;
        vals[worst] = fc;
      } else {
        for (int i : {mid, worst}) {
          pts[i] = {0.5 * (pts[i][0] + pts[best][0]),
                    0.5 * (pts[i][1] + pts[best][1])};
          vals[i] = f(pts[i]);
          ++evals;
        }
      }
    }
  }
  std::array<int, 3> order = {0, 1, 2};
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return vals[a] < vals[b]; });
  return {pts[order[0]], vals[order[0]], converged, evals};
}

SmaFit make_fit(const MetaDataset& d, double theta, double tau) {
  SmaFit fit;
  fit.theta_hat = theta;
  fit.tau_hat = tau;
  fit.loglik = -0.5 * re_neg2_loglik(theta, tau, d);

  // Standard errors from the observed information of the log-likelihood,
  // differentiated centrally with per-coordinate steps 1e-5 * scale.
  const auto half_obj = [&](double th, double ta) {
    return 0.5 * re_neg2_loglik(th, std::max(ta, 0.0), d);
  };
  double se = 0.0;
  if (tau > 1e-8) {
    const double h0 = 1e-5 * std::max(1.0, std::abs(theta));
    const double h1 = 1e-5 * std::max(1.0, std::abs(tau));
    const double f0 = half_obj(theta, tau);
    const double h00 =
        (half_obj(theta + h0, tau) - 2.0 * f0 + half_obj(theta - h0, tau)) /
        (h0 * h0);
    const double h11 =
        (half_obj(theta, tau + h1) - 2.0 * f0 + half_obj(theta, tau - h1)) /
        (h1 * h1);
    const double h01 = (half_obj(theta + h0, tau + h1) -
                        half_obj(theta + h0, tau - h1) -
                        half_obj(theta - h0, tau + h1) +
                        half_obj(theta - h0, tau - h1)) /
                       (4.0 * h0 * h1);
    const double det = h00 * h11 - h01 * h01;
    if (det > 0.0 && h00 > 0.0) se = std::sqrt(h11 / det);
  }
  if (!(se > 0.0) || !std::isfinite(se)) {
    // Boundary (tau = 0) or ill-conditioned Hessian: theta-only information.
    double den = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      den += 1.0 / (d.s(i) * d.s(i) + tau * tau);
    }
    se = 1.0 / std::sqrt(den);
  }
  fit.se_theta = se;
  fit.ci_lo = theta - 1.96 * se;
  fit.ci_hi = theta + 1.96 * se;
  return fit;
}

}  // namespace

SmaFit fit_sma(const MetaDataset& d) {
  if (d.size() < 2) {
    throw std::invalid_argument("fit_sma requires n >= 2 studies");
  }

  const auto objective = [&](const std::array<double, 2>& x) {
    return re_neg2_loglik(x[0], std::exp(x[1]), d);
  };

  // Moment-based start: inverse-variance mean and a residual-based tau.
  double theta0 = weighted_mean(d, 0.0);
  double msd = 0.0, mean_s2 = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    msd += (d.y(i) - theta0) * (d.y(i) - theta0);
    mean_s2 += d.s(i) * d.s(i);
  }
  msd /= static_cast<double>(d.size());
  mean_s2 /= static_cast<double>(d.size());
  const double tau0 = std::sqrt(std::max(msd - mean_s2, 1e-4 * mean_s2));

  auto res = nelder_mead_2d(objective, {theta0, std::log(tau0)}, 0.1, 0.5,
                            kMaxEvals);
  // One restart from the incumbent with a fresh simplex.
  res = nelder_mead_2d(objective, res.x, 0.02, 0.1, kMaxEvals - res.evals);

  double tau_hat = std::exp(res.x[1]);
  // theta is available in closed form given tau.
  double theta_hat = weighted_mean(d, tau_hat);
  const double interior_obj = re_neg2_loglik(theta_hat, tau_hat, d);

  // log-tau never reaches the tau = 0 boundary; compare it explicitly.
  const double theta_boundary = weighted_mean(d, 0.0);
  const double boundary_obj = re_neg2_loglik(theta_boundary, 0.0, d);
  const double mean_s = std::sqrt(mean_s2);
  if (boundary_obj <= interior_obj || tau_hat < 1e-6 * mean_s) {
    theta_hat = theta_boundary;
    tau_hat = 0.0;
  }

  if (!res.converged && tau_hat != 0.0) {
    throw FitError("fit_sma: no convergence within 10000 evaluations",
                   make_fit(d, theta_hat, tau_hat));
  }
  return make_fit(d, theta_hat, tau_hat);
}

}  // namespace rbc
