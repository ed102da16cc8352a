#include "rbc/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "rbc/special.hpp"

namespace rbc {

std::string EffectsFamily::name() const {
  switch (kind) {
    case FamilyKind::normal:
      return "normal";
    case FamilyKind::laplace:
      return "laplace";
    case FamilyKind::student_t:
      return "student_t";
    case FamilyKind::slash:
      return "slash";
  }
  return "unknown";
}

EffectsFamily family_from_name(std::string_view name) {
  if (name == "normal") return EffectsFamily::normal();
  if (name == "laplace") return EffectsFamily::laplace();
  if (name == "t" || name == "student_t") return EffectsFamily::student_t();
  if (name == "slash") return EffectsFamily::slash();
  throw std::invalid_argument("unknown effects family '" + std::string(name) +
                              "'");
}

namespace {

// Slash density via the incomplete-gamma closed form:
//   p(u) = xi/sqrt(2 pi) * (2/u^2)^(xi + 1/2) * gamma(xi + 1/2, u^2/2).
double slash_density_closed_form(double xi, double u) {
  const double a = xi + 0.5;
  const double x = 0.5 * u * u;
  const double lower_gamma = std::exp(std::lgamma(a)) * gamma_p(a, x);
  return xi / kSqrt2Pi * std::pow(2.0 / (u * u), a) * lower_gamma;
}

// Direct quadrature of the Table-style mixture over the precision lambda.
double slash_density_quadrature(double xi, double u) {
  const double half_u2 = 0.5 * u * u;
  const auto integrand = [&](double lam) {
    return std::pow(lam, xi - 0.5) * std::exp(-lam * half_u2);
  };
  const double integral = adaptive_simpson(integrand, 0.0, 1.0, 1e-10);
  return xi / kSqrt2Pi * integral;
}

}  // namespace

double log_density(const EffectsFamily& fam, double u) {
  switch (fam.kind) {
    case FamilyKind::normal:
      return norm_logpdf(u);
    case FamilyKind::laplace:
      return -std::abs(u) - M_LN2;
    case FamilyKind::student_t: {
      const double nu = fam.nu;
      const double norm_const = std::lgamma(0.5 * (nu + 1.0)) -
                                std::lgamma(0.5 * nu) -
                                0.5 * std::log(nu * M_PI);
      return norm_const - 0.5 * (nu + 1.0) * std::log1p(u * u / nu);
    }
    case FamilyKind::slash: {
      const double xi = fam.xi;
      if (u == 0.0) {
        // Removable point: p(0) = xi / ((xi + 1/2) sqrt(2 pi)).
        return std::log(xi / (xi + 0.5)) - std::log(kSqrt2Pi);
      }
      const double p = (xi == 1.0) ? slash_density_closed_form(xi, u)
                                   : slash_density_quadrature(xi, u);
      return std::log(p);
    }
  }
  throw std::logic_error("unreachable family kind");
}

double sample_truncated_normal(double mean, double sd, double lower,
                               RandomSource& rng) {
  if (!(sd > 0.0)) throw std::invalid_argument("sd must be positive");
  const double alpha = (lower - mean) / sd;
  double z;
  if (alpha < 0.5) {
    do {
      z = rng.normal();
    } while (z <= alpha);
  } else {
    // Robert (1995): shifted exponential proposal, efficient for any alpha.
    const double lam = 0.5 * (alpha + std::sqrt(alpha * alpha + 4.0));
    for (;;) {
      const double x = alpha + rng.exponential(lam);
      const double d = x - lam;
      if (std::log(rng.uniform_open()) <= -0.5 * d * d) {
        z = x;
        break;
      }
    }
  }
  return mean + sd * z;
}

double truncated_normal_mean(double mean, double sd, double lower) {
  const double alpha = (lower - mean) / sd;
  return mean + sd * norm_hazard(alpha);
}

double truncated_normal_var(double mean, double sd, double lower) {
  const double alpha = (lower - mean) / sd;
  const double h = norm_hazard(alpha);
  (void)mean;
  return sd * sd * (1.0 + alpha * h - h * h);
}

double sample_prior(PriorParam which, const PriorConfig& hyper,
                    RandomSource& rng) {
  switch (which) {
    case PriorParam::theta:
      return std::sqrt(hyper.sigma_theta_sq) * rng.normal();
    case PriorParam::tau:
      return rng.half_cauchy();
    case PriorParam::rho:
      return hyper.rho_fixed_zero ? 0.0 : rng.uniform(-1.0, 1.0);
    case PriorParam::gamma0:
      return rng.uniform(hyper.gamma0_lower, hyper.gamma0_upper);
    case PriorParam::gamma1:
      return rng.uniform(0.0, hyper.gamma1_upper);
  }
  throw std::logic_error("unreachable prior parameter");
}

DensityGrid::DensityGrid(std::vector<double> grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (grid_.size() != values_.size() || grid_.size() < 2) {
    throw std::invalid_argument("density grid needs >= 2 matched points");
  }
  for (std::size_t i = 0; i + 1 < grid_.size(); ++i) {
    if (!(grid_[i] < grid_[i + 1])) {
      throw std::invalid_argument("density grid must be strictly increasing");
    }
  }
  for (const double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("density values must be finite and >= 0");
    }
  }
  const double mass = integral();
  if (mass < 0.99 || mass > 1.01) {
    throw std::invalid_argument("density grid mass " + std::to_string(mass) +
                                " outside [0.99, 1.01]");
  }
}

double DensityGrid::integral() const {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < grid_.size(); ++i) {
    acc += 0.5 * (values_[i] + values_[i + 1]) * (grid_[i + 1] - grid_[i]);
  }
  return acc;
}

std::string DensityGrid::to_csv() const {
  std::string out = "x,density\n";
  char buf[80];
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", grid_[i], values_[i]);
    out += buf;
  }
  return out;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

DensityGrid kde(std::span<const double> samples, std::size_t n_grid,
                double bandwidth_override) {
  const std::size_t m = samples.size();
  if (m < 100) {
    throw std::invalid_argument("kde requires at least 100 samples");
  }
  if (n_grid < 2) throw std::invalid_argument("kde needs n_grid >= 2");

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());

  double mean = 0.0;
  for (const double v : sorted) mean += v;
  mean /= static_cast<double>(m);
  double ss = 0.0;
  for (const double v : sorted) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(m - 1));
  if (!(sd > 0.0)) {
    throw std::invalid_argument("kde requires samples with positive variance");
  }

  double h = bandwidth_override;
  if (!(h > 0.0)) {
    const double iqr =
        quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    double spread = sd;
    if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
    h = 0.9 * spread * std::pow(static_cast<double>(m), -0.2);
  }

  const double lo = sorted.front() - 3.0 * h;
  const double hi = sorted.back() + 3.0 * h;
  const double step = (hi - lo) / static_cast<double>(n_grid - 1);

  std::vector<double> grid(n_grid);
  std::vector<double> values(n_grid, 0.0);
  for (std::size_t k = 0; k < n_grid; ++k) {
    grid[k] = lo + static_cast<double>(k) * step;
  }

  // Kernel contributions beyond 8.6 bandwidths are below double precision;
  // samples are sorted, so each grid point only visits a window.
  const double cutoff = 8.6 * h;
  const double inv_h = 1.0 / h;
  const double scale = 1.0 / (static_cast<double>(m) * h * kSqrt2Pi);
  for (std::size_t k = 0; k < n_grid; ++k) {
    const double x = grid[k];
    const auto first =
        std::lower_bound(sorted.begin(), sorted.end(), x - cutoff);
    const auto last = std::upper_bound(first, sorted.end(), x + cutoff);
    double acc = 0.0;
    for (auto it = first; it != last; ++it) {
      const double t = (x - *it) * inv_h;
      acc += std::exp(-0.5 * t * t);
    }
    values[k] = acc * scale;
  }
  return DensityGrid(std::move(grid), std::move(values));
}

namespace {

// Piecewise-linear evaluation with zero outside the grid's support.
double interp_zero(const std::vector<double>& xs, const std::vector<double>& ys,
                   double x) {
  if (x < xs.front() || x > xs.back()) return 0.0;
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  if (it == xs.begin()) return ys.front();
  if (it == xs.end()) return ys.back();
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + w * (ys[hi] - ys[lo]);
}

}  // namespace

double hellinger(const DensityGrid& f, const DensityGrid& g) {
  const double lo = std::min(f.grid().front(), g.grid().front());
  const double hi = std::max(f.grid().back(), g.grid().back());
  const std::size_t n = std::max<std::size_t>({512, f.size(), g.size()});
  const double step = (hi - lo) / static_cast<double>(n - 1);

  std::vector<double> fv(n), gv(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double x = lo + static_cast<double>(k) * step;
    fv[k] = interp_zero(f.grid(), f.values(), x);
    gv[k] = interp_zero(g.grid(), g.values(), x);
  }

  // Renormalize both densities under the shared trapezoid rule so that the
  // identity case integrates to exactly one and grid truncation does not
  // leak into the distance.
  const auto trapezoid = [&](const std::vector<double>& v) {
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) acc += 0.5 * (v[k] + v[k + 1]);
    return acc * step;
  };
  const double fm = trapezoid(fv);
  const double gm = trapezoid(gv);
  if (!(fm > 0.0) || !(gm > 0.0)) {
    throw std::invalid_argument("hellinger: degenerate density grid");
  }

  std::vector<double> root(n);
  const double inv = 1.0 / std::sqrt(fm * gm);
  for (std::size_t k = 0; k < n; ++k) {
    root[k] = std::sqrt(fv[k] * gv[k]) * inv;
  }
  const double overlap = trapezoid(root);
  const double h = std::sqrt(std::max(0.0, 1.0 - overlap));
  return std::min(h, 1.0);
}

}  // namespace rbc
