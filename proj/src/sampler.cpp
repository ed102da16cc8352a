#include "rbc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "rbc/special.hpp"

namespace rbc {

namespace {

// Variance multiplier v(lambda) of the normal scale mixture for each family:
// mu_i | lambda_i ~ N(theta, tau^2 * v(lambda_i)).
double mixture_variance_multiplier(const EffectsFamily& fam, double lambda) {
  switch (fam.kind) {
    case FamilyKind::normal:
      return 1.0;
    case FamilyKind::laplace:
    case FamilyKind::student_t:
      return lambda;
    case FamilyKind::slash:
      return 1.0 / lambda;
  }
  return 1.0;
}

// Gamma(a, rate) truncated to (0, 1]: power-function proposal when the rate
// is small relative to the shape, otherwise gamma proposals rejected above 1.
// Falls back to CDF inversion for large shapes where both rejection schemes
// degenerate.
double sample_truncated_gamma01(double a, double rate, RandomSource& rng) {
  if (rate < 1e-12) {
    // Target reduces to a * lambda^(a-1) on (0, 1].
    return std::pow(rng.uniform_open(), 1.0 / a);
  }
  if (a <= 5.0) {
    if (rate <= a) {
      for (;;) {
        const double lam = std::pow(rng.uniform_open(), 1.0 / a);
        if (std::log(rng.uniform_open()) <= -rate * lam) return lam;
      }
    }
    for (;;) {
      const double lam = rng.gamma(a, rate);
      if (lam <= 1.0) return lam;
    }
  }
  // Bisection on the regularized incomplete gamma; shape > 5 only occurs for
  // unusually large slash xi.
  const double total = gamma_p(a, rate);
  const double target = rng.uniform_open() * total;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gamma_p(a, rate * mid) < target ? lo : hi) = mid;
  }
  return std::max(0.5 * (lo + hi), std::numeric_limits<double>::min());
}

void update_z(ChainState& st, const MetaDataset& d, RandomSource& rng) {
  const double sd = std::sqrt(1.0 - st.rho * st.rho);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double mean = st.gamma0 + st.gamma1 / d.s(i) +
                        st.rho * (d.y(i) - st.mu[i]) / d.s(i);
    double z = sample_truncated_normal(mean, sd, 0.0, rng);
    if (!(z > 0.0)) z = std::numeric_limits<double>::min();
    st.z[i] = z;
  }
}

void update_mu(ChainState& st, const MetaDataset& d, const PriorConfig& prior,
               RandomSource& rng) {
  const double one_minus_rho2 = 1.0 - st.rho * st.rho;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double s = d.s(i);
    const double prior_var =
        st.tau * st.tau *
        mixture_variance_multiplier(prior.family, st.lambda[i]);
    if (prior_var < 1e-300) {
      st.mu[i] = st.theta;
      continue;
    }
    const double like_var = s * s * one_minus_rho2;
    const double ytilde =
        d.y(i) - st.rho * s * (st.z[i] - st.gamma0 - st.gamma1 / s);
    const double prec = 1.0 / like_var + 1.0 / prior_var;
    const double mean = (ytilde / like_var + st.theta / prior_var) / prec;
    st.mu[i] = mean + rng.normal() / std::sqrt(prec);
  }
}

void update_lambda(ChainState& st, const MetaDataset& d,
                   const PriorConfig& prior, RandomSource& rng) {
  const auto& fam = prior.family;
  if (fam.kind == FamilyKind::normal) return;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double u = (st.mu[i] - st.theta) / st.tau;
    double lam = 1.0;
    switch (fam.kind) {
      case FamilyKind::laplace:
        // u | lambda ~ N(0, lambda), lambda ~ Exp(1/2):
        // 1/lambda | u ~ InverseGaussian(1/|u|, 1).
        if (std::abs(u) < 1e-8) {
          lam = rng.chi_squared_1();
        } else {
          lam = 1.0 / rng.inverse_gaussian(1.0 / std::abs(u), 1.0);
        }
        break;
      case FamilyKind::student_t:
        // lambda | u ~ InvGamma((nu+1)/2, (nu + u^2)/2).
        lam = 0.5 * (fam.nu + u * u) / rng.gamma(0.5 * (fam.nu + 1.0), 1.0);
        break;
      case FamilyKind::slash:
        // lambda | u ~ Gamma(xi + 1/2, u^2/2) truncated to (0, 1].
        lam = sample_truncated_gamma01(fam.xi + 0.5, 0.5 * u * u, rng);
        break;
      case FamilyKind::normal:
        break;
    }
    if (!(lam > 0.0)) lam = std::numeric_limits<double>::min();
    st.lambda[i] = lam;
  }
}

void update_theta(ChainState& st, const MetaDataset& d,
                  const PriorConfig& prior, RandomSource& rng) {
  double prec = 1.0 / prior.sigma_theta_sq;
  double wsum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double var =
        st.tau * st.tau *
        mixture_variance_multiplier(prior.family, st.lambda[i]);
    const double w = 1.0 / std::max(var, 1e-300);
    prec += w;
    wsum += w * st.mu[i];
  }
  const double mean = wsum / prec;
  st.theta = mean + rng.normal() / std::sqrt(prec);
}

// Log conditional of log(tau) given (mu, theta, lambda): normal likelihood of
// the mu deviations, half-Cauchy prior, plus the log-tau Jacobian.
double log_tau_target(double log_tau, double sq_sum, std::size_t n) {
  const double tau2 = std::exp(2.0 * log_tau);
  return -static_cast<double>(n - 1) * log_tau - 0.5 * sq_sum / tau2 -
         std::log1p(tau2);
}

bool update_tau(ChainState& st, const MetaDataset& d, const PriorConfig& prior,
                RandomSource& rng) {
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double dev = st.mu[i] - st.theta;
    const double v = mixture_variance_multiplier(prior.family, st.lambda[i]);
    sq_sum += dev * dev / v;
  }
  const double cur = std::log(st.tau);
  const double prop = cur + st.step[kBlockTau] * rng.normal();
  const double log_ratio = log_tau_target(prop, sq_sum, d.size()) -
                           log_tau_target(cur, sq_sum, d.size());
  if (std::log(rng.uniform_open()) < log_ratio) {
    st.tau = std::exp(prop);
    return true;
  }
  return false;
}

// Augmented log likelihood in (rho, gamma0, gamma1) given (y, z, mu):
// sum_i [ log phi(z_i - m_i) - log Phi(m_i)
//         + log N(y_i | mu_i + rho s_i (z_i - m_i), s_i^2 (1 - rho^2)) ]
// with m_i = gamma0 + gamma1/s_i; terms free of the block dropped.
double selection_block_target(double rho, double gamma0, double gamma1,
                              const ChainState& st, const MetaDataset& d) {
  const double one_minus_rho2 = 1.0 - rho * rho;
  double acc =
      -0.5 * static_cast<double>(d.size()) * std::log(one_minus_rho2);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double s = d.s(i);
    const double m = gamma0 + gamma1 / s;
    const double zdev = st.z[i] - m;
    const double ydev = (d.y(i) - st.mu[i] - rho * s * zdev) / s;
    acc += -0.5 * zdev * zdev - log_norm_cdf(m) -
           0.5 * ydev * ydev / one_minus_rho2;
  }
  return acc;
}

double reflect_into(double x, double lo, double hi) {
  const double width = hi - lo;
  while (x < lo || x > hi) {
    if (x < lo) x = 2.0 * lo - x;
    if (x > hi) x = 2.0 * hi - x;
  }
  (void)width;
  return x;
}

void update_selection_block(ChainState& st, const MetaDataset& d,
                            const PriorConfig& prior, RandomSource& rng,
                            std::array<int, kNumMhBlocks>* accepts) {
  double current =
      selection_block_target(st.rho, st.gamma0, st.gamma1, st, d);

  if (!prior.rho_fixed_zero) {
    // Random walk on the Fisher-z scale; the Jacobian of rho = tanh(w)
    // contributes log(1 - rho^2).
    const double w = std::atanh(st.rho);
    const double wp = w + st.step[kBlockRho] * rng.normal();
    const double rho_prop = std::tanh(wp);
    const double prop_target =
        selection_block_target(rho_prop, st.gamma0, st.gamma1, st, d);
    const double log_ratio = prop_target - current +
                             std::log1p(-rho_prop * rho_prop) -
                             std::log1p(-st.rho * st.rho);
    if (std::log(rng.uniform_open()) < log_ratio) {
      st.rho = rho_prop;
      current = prop_target;
      if (accepts) (*accepts)[kBlockRho] = 1;
    }
  }

  {
    const double prop = reflect_into(
        st.gamma0 + st.step[kBlockGamma0] * rng.normal(), prior.gamma0_lower,
        prior.gamma0_upper);
    const double prop_target =
        selection_block_target(st.rho, prop, st.gamma1, st, d);
    if (std::log(rng.uniform_open()) < prop_target - current) {
      st.gamma0 = prop;
      current = prop_target;
      if (accepts) (*accepts)[kBlockGamma0] = 1;
    }
  }

  {
    const double prop =
        reflect_into(st.gamma1 + st.step[kBlockGamma1] * rng.normal(), 0.0,
                     prior.gamma1_upper);
    const double prop_target =
        selection_block_target(st.rho, st.gamma0, prop, st, d);
    if (std::log(rng.uniform_open()) < prop_target - current) {
      st.gamma1 = prop;
      if (accepts) (*accepts)[kBlockGamma1] = 1;
    }
  }
}

}  // namespace

PriorConfig default_prior(const MetaDataset& d, EffectsFamily family,
                          bool rho_fixed_zero) {
  PriorConfig prior;
  prior.family = family;
  prior.rho_fixed_zero = rho_fixed_zero;
  prior.gamma1_upper = d.s_max();
  return prior;
}

ChainState init_state(const MetaDataset& d, const PriorConfig& prior) {
  if (d.size() < 2) {
    throw std::invalid_argument("sampler requires n >= 2 studies");
  }
  if (!(prior.gamma1_upper > 0.0) || !(prior.sigma_theta_sq > 0.0) ||
      !(prior.gamma0_lower < prior.gamma0_upper)) {
    throw std::invalid_argument("invalid prior configuration");
  }
  const SmaFit sma = fit_sma(d);

  double mean_s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) mean_s += d.s(i);
  mean_s /= static_cast<double>(d.size());

  ChainState st;
  st.theta = sma.theta_hat;
  st.tau = std::max(sma.tau_hat, 0.01 * mean_s);
  st.rho = 0.0;
  st.gamma0 = std::clamp(-1.0, prior.gamma0_lower + 0.05, prior.gamma0_upper - 0.05);
  st.gamma1 = std::min(0.3, 0.5 * prior.gamma1_upper);
  st.step[kBlockGamma1] = 0.1 * prior.gamma1_upper;

  const std::size_t n = d.size();
  st.mu.resize(n);
  st.z.resize(n);
  st.lambda.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double s2 = d.s(i) * d.s(i);
    const double tau2 = st.tau * st.tau;
    st.mu[i] =
        (d.y(i) / s2 + st.theta / tau2) / (1.0 / s2 + 1.0 / tau2);
    st.z[i] = truncated_normal_mean(st.gamma0 + st.gamma1 / d.s(i), 1.0, 0.0);
  }
  return st;
}

void gibbs_sweep(ChainState& st, const MetaDataset& d,
                 const PriorConfig& prior, RandomSource& rng,
                 std::array<int, kNumMhBlocks>* accepts) {
  if (accepts) accepts->fill(0);
  update_z(st, d, rng);
  update_mu(st, d, prior, rng);
  update_lambda(st, d, prior, rng);
  update_theta(st, d, prior, rng);
  if (update_tau(st, d, prior, rng) && accepts) (*accepts)[kBlockTau] = 1;
  update_selection_block(st, d, prior, rng, accepts);
}

Chain run_chain(const MetaDataset& d, const PriorConfig& prior,
                const SamplerConfig& cfg, std::size_t chain_id) {
  if (cfg.burn_in >= cfg.n_iter) {
    throw std::invalid_argument("burn_in must be < n_iter");
  }
  if (cfg.thin == 0) throw std::invalid_argument("thin must be >= 1");

  RandomSource rng(RandomSource::mix(cfg.seed, chain_id));
  ChainState st = init_state(d, prior);

  Chain chain;
  chain.seed = cfg.seed;
  const std::size_t kept = (cfg.n_iter - cfg.burn_in + cfg.thin - 1) / cfg.thin;
  chain.theta.reserve(kept);
  chain.tau.reserve(kept);
  chain.rho.reserve(kept);
  chain.gamma0.reserve(kept);
  chain.gamma1.reserve(kept);
  chain.mu.reserve(kept);

  std::array<int, kNumMhBlocks> accepts{};
  std::array<std::size_t, kNumMhBlocks> window_accepts{};
  std::array<std::size_t, kNumMhBlocks> kept_accepts{};
  const std::size_t window = std::max<std::size_t>(cfg.adapt_window, 1);
  std::size_t adapt_batch = 0;

  for (std::size_t iter = 0; iter < cfg.n_iter; ++iter) {
    gibbs_sweep(st, d, prior, rng, &accepts);

    if (iter < cfg.burn_in) {
      for (std::size_t b = 0; b < kNumMhBlocks; ++b) {
        window_accepts[b] += static_cast<std::size_t>(accepts[b]);
      }
      if ((iter + 1) % window == 0) {
        // Robbins-Monro scaling toward 0.44 acceptance; frozen after
        // burn-in so the post-burn-in kernel is a fixed MCMC kernel.
        ++adapt_batch;
        const double gain =
            std::min(0.25, 1.0 / std::sqrt(static_cast<double>(adapt_batch)));
        for (std::size_t b = 0; b < kNumMhBlocks; ++b) {
          const double rate = static_cast<double>(window_accepts[b]) /
                              static_cast<double>(window);
          double s = st.step[b] * std::exp(gain * (rate - 0.44));
          st.step[b] = std::clamp(s, 1e-3, 10.0);
          window_accepts[b] = 0;
        }
      }
      continue;
    }

    for (std::size_t b = 0; b < kNumMhBlocks; ++b) {
      kept_accepts[b] += static_cast<std::size_t>(accepts[b]);
    }
    if ((iter - cfg.burn_in) % cfg.thin == 0) {
      chain.theta.push_back(st.theta);
      chain.tau.push_back(st.tau);
      chain.rho.push_back(st.rho);
      chain.gamma0.push_back(st.gamma0);
      chain.gamma1.push_back(st.gamma1);
      chain.mu.push_back(st.mu);
    }
  }

  const double post_iters = static_cast<double>(cfg.n_iter - cfg.burn_in);
  for (std::size_t b = 0; b < kNumMhBlocks; ++b) {
    chain.acceptance_rates[b] =
        static_cast<double>(kept_accepts[b]) / post_iters;
  }
  return chain;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of empty set");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

namespace {

const std::vector<double>& chain_column(const Chain& c, std::string_view p) {
  if (p == "theta") return c.theta;
  if (p == "tau") return c.tau;
  if (p == "rho") return c.rho;
  if (p == "gamma0") return c.gamma0;
  if (p == "gamma1") return c.gamma1;
  throw std::invalid_argument("unknown parameter '" + std::string(p) + "'");
}

}  // namespace

Summary posterior_summary(const std::vector<Chain>& chains,
                          std::string_view param) {
  std::vector<double> pooled;
  for (const auto& c : chains) {
    const auto& col = chain_column(c, param);
    pooled.insert(pooled.end(), col.begin(), col.end());
  }
  if (pooled.empty()) {
    throw std::invalid_argument("posterior_summary: no draws");
  }
  Summary s;
  long double acc = 0.0L;
  for (const double v : pooled) acc += v;
  s.mean = static_cast<double>(acc / static_cast<long double>(pooled.size()));
  long double ss = 0.0L;
  for (const double v : pooled) {
    ss += (v - s.mean) * (v - s.mean);
  }
  s.sd = pooled.size() > 1
             ? std::sqrt(static_cast<double>(
                   ss / static_cast<long double>(pooled.size() - 1)))
             : 0.0;
  s.median = quantile(pooled, 0.5);
  s.ci_lo = quantile(pooled, 0.025);
  s.ci_hi = quantile(pooled, 0.975);
  s.point = (param == "rho") ? s.median : s.mean;
  return s;
}

namespace {

// Split-Rhat and effective sample size over split half-sequences.
struct SplitStats {
  double rhat;
  double ess;
};

SplitStats split_diagnostics(const std::vector<const std::vector<double>*>& cols) {
  std::size_t min_len = std::numeric_limits<std::size_t>::max();
  for (const auto* c : cols) min_len = std::min(min_len, c->size());
  const std::size_t half = min_len / 2;
  if (half < 4) return {std::numeric_limits<double>::quiet_NaN(), 0.0};

  std::vector<std::vector<double>> seqs;
  for (const auto* c : cols) {
    seqs.emplace_back(c->begin(), c->begin() + half);
    seqs.emplace_back(c->begin() + half, c->begin() + 2 * half);
  }
  const std::size_t m = seqs.size();
  const double L = static_cast<double>(half);

  std::vector<double> means(m), vars(m);
  for (std::size_t j = 0; j < m; ++j) {
    double mu = 0.0;
    for (const double v : seqs[j]) mu += v;
    mu /= L;
    double ss = 0.0;
    for (const double v : seqs[j]) ss += (v - mu) * (v - mu);
    means[j] = mu;
    vars[j] = ss / (L - 1.0);
  }
  double grand = 0.0;
  for (const double v : means) grand += v;
  grand /= static_cast<double>(m);
  double w = 0.0, b = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    w += vars[j];
    b += (means[j] - grand) * (means[j] - grand);
  }
  w /= static_cast<double>(m);
  b *= L / (static_cast<double>(m) - 1.0);

  const double var_plus = (L - 1.0) / L * w + b / L;
  double rhat;
  if (w < 1e-300) {
    rhat = (b < 1e-300) ? 1.0 : std::numeric_limits<double>::infinity();
  } else {
    rhat = std::sqrt(var_plus / w);
  }

  // Multi-sequence autocorrelation estimate with Geyer's initial monotone
  // positive sequence.
  double ess = 0.0;
  if (var_plus > 1e-300) {
    const std::size_t max_lag = half - 1;
    double tau_int = 1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t t = 1; t + 1 <= max_lag; t += 2) {
      double rho_pair = 0.0;
      bool valid = true;
      for (std::size_t dt = t; dt <= t + 1; ++dt) {
        double acov = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          double cj = 0.0;
          for (std::size_t i = 0; i + dt < half; ++i) {
            cj += (seqs[j][i] - means[j]) * (seqs[j][i + dt] - means[j]);
          }
          acov += cj / L;
        }
        acov /= static_cast<double>(m);
        const double rho_t = 1.0 - (w - acov) / var_plus;
        rho_pair += rho_t;
      }
      if (rho_pair < 0.0) valid = false;
      if (!valid) break;
      rho_pair = std::min(rho_pair, prev_pair);  // enforce monotone decrease
      tau_int += 2.0 * rho_pair;
      prev_pair = rho_pair;
    }
    const double total = static_cast<double>(m) * L;
    ess = std::min(total / tau_int, total);
  }
  return {rhat, ess};
}

}  // namespace

DiagReport diagnostics(const std::vector<Chain>& chains) {
  if (chains.empty()) {
    throw std::invalid_argument("diagnostics: no chains");
  }
  static const char* kParams[] = {"theta", "tau", "rho", "gamma0", "gamma1"};
  DiagReport report;
  const bool single = chains.size() < 2;
  for (const char* p : kParams) {
    std::vector<const std::vector<double>*> cols;
    for (const auto& c : chains) cols.push_back(&chain_column(c, p));
    SplitStats stats = split_diagnostics(cols);
    if (single) stats.rhat = std::numeric_limits<double>::quiet_NaN();
    report.rows.push_back({p, stats.rhat, stats.ess});
    if (!std::isnan(stats.rhat)) {
      report.max_rhat = std::max(report.max_rhat, stats.rhat);
    }
  }
  report.flagged = report.max_rhat > 1.05;
  return report;
}

std::vector<double> RbcFit::pooled(std::string_view param) const {
  std::vector<double> out;
  for (const auto& c : chains) {
    const auto& col = chain_column(c, param);
    out.insert(out.end(), col.begin(), col.end());
  }
  return out;
}

RbcFit fit_rbc(const MetaDataset& d, const PriorConfig& prior,
               const SamplerConfig& cfg, bool parallel_chains) {
  if (cfg.n_chains < 1) throw std::invalid_argument("n_chains must be >= 1");
  RbcFit fit;
  fit.family = prior.family;
  fit.prior = prior;
  fit.config = cfg;
  fit.chains.resize(cfg.n_chains);

  if (parallel_chains && cfg.n_chains > 1) {
    std::vector<std::future<Chain>> futures;
    futures.reserve(cfg.n_chains);
    for (std::size_t c = 0; c < cfg.n_chains; ++c) {
      futures.push_back(std::async(std::launch::async, [&, c] {
        return run_chain(d, prior, cfg, c);
      }));
    }
    for (std::size_t c = 0; c < cfg.n_chains; ++c) {
      fit.chains[c] = futures[c].get();
    }
  } else {
    for (std::size_t c = 0; c < cfg.n_chains; ++c) {
      fit.chains[c] = run_chain(d, prior, cfg, c);
    }
  }

  for (const char* p : {"theta", "tau", "rho", "gamma0", "gamma1"}) {
    fit.summaries.emplace(p, posterior_summary(fit.chains, p));
  }
  fit.diag = diagnostics(fit.chains);
  return fit;
}

std::string chains_to_csv(const std::vector<Chain>& chains,
                          const SamplerConfig& cfg, bool include_mu) {
  std::string out = "chain,iteration,theta,tau,rho,gamma0,gamma1";
  const std::size_t n_mu =
      (!chains.empty() && !chains[0].mu.empty()) ? chains[0].mu[0].size() : 0;
  if (include_mu) {
    for (std::size_t i = 0; i < n_mu; ++i) {
      out += ",mu_" + std::to_string(i + 1);
    }
  }
  out += '\n';
  char buf[64];
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const Chain& chain = chains[c];
    for (std::size_t k = 0; k < chain.n_draws(); ++k) {
      const std::size_t iter = cfg.burn_in + k * cfg.thin;
      std::snprintf(buf, sizeof(buf), "%zu,%zu", c, iter);
      out += buf;
      for (const double v : {chain.theta[k], chain.tau[k], chain.rho[k],
                             chain.gamma0[k], chain.gamma1[k]}) {
        std::snprintf(buf, sizeof(buf), ",%.17g", v);
        out += buf;
      }
      if (include_mu) {
        for (const double v : chain.mu[k]) {
          std::snprintf(buf, sizeof(buf), ",%.17g", v);
          out += buf;
        }
      }
      out += '\n';
    }
  }
  return out;
}

}  // namespace rbc
