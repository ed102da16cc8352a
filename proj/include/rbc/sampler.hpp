#pragma once

// Metropolis-within-Gibbs sampler for the selection-model posterior via data
// augmentation: latent propensities z_i for the truncation and scale-mixture
// latents lambda_i for the heavy-tailed random-effects families.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rbc/dataset.hpp"
#include "rbc/distributions.hpp"
#include "rbc/likelihood.hpp"
#include "rbc/rng.hpp"

namespace rbc {

struct SamplerConfig {
  std::size_t n_iter = 20000;
  std::size_t burn_in = 10000;
  std::size_t n_chains = 4;
  std::size_t thin = 1;
  std::uint64_t seed = 0;
  std::size_t adapt_window = 50;
};

// Indices into ChainState::step and the per-block acceptance counters.
enum MhBlock : std::size_t {
  kBlockTau = 0,
  kBlockRho = 1,
  kBlockGamma0 = 2,
  kBlockGamma1 = 3,
  kNumMhBlocks = 4
};

struct ChainState {
  double theta = 0.0;
  double tau = 1.0;
  double rho = 0.0;
  double gamma0 = -1.0;
  double gamma1 = 0.1;
  std::vector<double> mu;      // study means, theta + tau * u_i
  std::vector<double> z;       // latent propensities, > 0
  std::vector<double> lambda;  // mixture scale latents; 1 for normal family
  std::array<double, kNumMhBlocks> step = {0.5, 0.5, 0.2, 0.1};
};

struct Chain {
  std::vector<double> theta, tau, rho, gamma0, gamma1;
  std::vector<std::vector<double>> mu;  // [draw][study]
  std::array<double, kNumMhBlocks> acceptance_rates = {};
  std::uint64_t seed = 0;
  std::size_t n_draws() const { return theta.size(); }
};

// Default priors for a dataset: gamma1 ~ U(0, s_max) and the weakly
// informative supports for the remaining selection parameters.
PriorConfig default_prior(const MetaDataset& d, EffectsFamily family,
                          bool rho_fixed_zero = false);

// Starting state: (theta, tau) from the maximum-likelihood baseline (tau
// floored at 0.01 * mean(s)), rho = 0, gamma0 = -1, gamma1 = min(0.3,
// gamma1_upper/2), z at its truncated-conditional mean, lambda = 1.
ChainState init_state(const MetaDataset& d, const PriorConfig& prior);

// One full sweep over the blocks (z, mu, lambda, theta, tau, (rho, gamma0,
// gamma1)); each block leaves the augmented posterior invariant. `accepts`,
// when non-null, receives 0/1 acceptance flags for the MH blocks.
void gibbs_sweep(ChainState& state, const MetaDataset& d,
                 const PriorConfig& prior, RandomSource& rng,
                 std::array<int, kNumMhBlocks>* accepts = nullptr);

// Runs one chain: adaptive scaling toward 0.44 acceptance during burn-in
// (frozen afterwards), keeps every `thin`-th post-burn-in draw.
// Deterministic given (cfg.seed, chain_id).
Chain run_chain(const MetaDataset& d, const PriorConfig& prior,
                const SamplerConfig& cfg, std::size_t chain_id);

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double ci_lo = 0.0;  // 2.5% quantile, linear interpolation
  double ci_hi = 0.0;  // 97.5% quantile
  double point = 0.0;  // median for rho, mean for everything else
};

// Pooled posterior summary for one of theta, tau, rho, gamma0, gamma1.
Summary posterior_summary(const std::vector<Chain>& chains,
                          std::string_view param);

struct DiagRow {
  std::string param;
  double rhat = 0.0;  // split-Rhat; NaN when only one chain is available
  double ess = 0.0;
};

struct DiagReport {
  std::vector<DiagRow> rows;
  double max_rhat = 0.0;
  bool flagged = false;  // any Rhat > 1.05
};

DiagReport diagnostics(const std::vector<Chain>& chains);

struct RbcFit {
  EffectsFamily family;
  PriorConfig prior;
  SamplerConfig config;
  std::vector<Chain> chains;
  std::map<std::string, Summary> summaries;
  DiagReport diag;

  std::vector<double> pooled(std::string_view param) const;
};

// Runs all chains (concurrently when parallel_chains is set), then summaries
// and diagnostics. Requires n >= 2.
RbcFit fit_rbc(const MetaDataset& d, const PriorConfig& prior,
               const SamplerConfig& cfg, bool parallel_chains = false);

// Columnar CSV (iteration, theta, tau, rho, gamma0, gamma1[, mu_1..mu_n]).
std::string chains_to_csv(const std::vector<Chain>& chains,
                          const SamplerConfig& cfg, bool include_mu = false);

// Linear-interpolation (type 7) quantile of unsorted values.
double quantile(std::vector<double> values, double p);

}  // namespace rbc
