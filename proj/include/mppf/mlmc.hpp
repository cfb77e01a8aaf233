#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mppf/filters.hpp"

namespace mppf {

/// Level range and per-level particle numbers of the multilevel filter.
struct MlAllocation {
  int l0 = 0;
  int L = 0;
  std::vector<long> N_levels;  // N_levels[l - l0], l = l0..L
  double epsilon = 0.0;
  double constant_C = 1.0;

  long N(int level) const { return N_levels.at(static_cast<std::size_t>(level - l0)); }
};

/// L is the smallest level >= l0 with Delta_L <= epsilon;
/// N_l = max(1, ceil(C * Delta_l^{3/4} * epsilon^{-5/2})).
MlAllocation mlpf_allocate(double epsilon, int l0, double constant_C = 1.0);

/// Total Euler sub-steps the allocation costs over T unit times.
std::uint64_t mlpf_cost(const MlAllocation& alloc, long T);

struct MlpfOptions {
  Quadrature quadrature = Quadrature::Right;
  /// Run every level from the same key instead of independent child keys.
  bool shared_key = false;
};

struct MlpfResult {
  std::vector<std::vector<double>> estimates;  // [t-1][f]
  /// level_terms[l - l0][t-1][f]: base PF estimate, then CPF differences.
  std::vector<std::vector<std::vector<double>>> level_terms;
  std::uint64_t cost_steps = 0;
};

MlpfResult run_mlpf(const ModelSpec& spec, const MarkedDataset& ds, long T,
                    const MlAllocation& alloc, const std::vector<TestFunction>& phis,
                    SeedKey key, const MlpfOptions& opts = {});

/// Level and particle-number randomization of the unbiased estimator.
struct Randomization {
  int l0 = 0;
  int L_trunc = 0;
  int P_trunc = 0;
  long N0 = 1;
  std::vector<double> level_pmf;     // over l0..L_trunc
  std::vector<double> particle_pmf;  // over 0..P_trunc

  long N(int p) const { return p < 0 ? 0 : N0 << p; }
  double level_prob(int l) const { return level_pmf.at(static_cast<std::size_t>(l - l0)); }
  double particle_prob(int p) const { return particle_pmf.at(static_cast<std::size_t>(p)); }

  int sample_level(double u) const;
  int sample_particle_index(double u) const;

  /// Throws ConfigError unless both pmfs are positive-or-zero and sum to 1.
  void validate() const;
};

/// P_L(l) ~ log(l+2)^2 (l+1) Delta_l^{1/2} on l0..L_trunc,
/// P_P(p) ~ log(p+2)^2 (p+1) / N_p on 0..P_trunc, with N_p = N0 2^p.
Randomization build_randomization(int l0, int L_trunc, int P_trunc, long N0);
/// Defaults for the OU, Langevin and NLDT models: (0, 10, 11, 5).
Randomization default_randomization();
/// Defaults for GBM: (0, 10, 5, 100).
Randomization default_randomization_gbm();

struct XiResult {
  double value = 0.0;
  int level = 0;
  int p = 0;
  std::uint64_t cost_steps = 0;
};

/// Xi at the base level l0 from independent PF batches of sizes
/// N_0, N_1 - N_0, ..., N_P - N_{P-1}. P is drawn from the particle pmf
/// using key unless forced_p is given.
XiResult compute_xi0(const ModelSpec& spec, const MarkedDataset& ds, long T,
                     const Randomization& rand, const TestFunction& phi, SeedKey key,
                     Quadrature quadrature = Quadrature::Right,
                     std::optional<int> forced_p = std::nullopt);

/// Xi at level l > l0 from independent CPF batches.
XiResult compute_xil(const ModelSpec& spec, const MarkedDataset& ds, long T, int level,
                     const Randomization& rand, const TestFunction& phi, SeedKey key,
                     Quadrature quadrature = Quadrature::Right,
                     std::optional<int> forced_p = std::nullopt);

struct UpfReplicate {
  long index = 0;
  int level = 0;
  int p = 0;
  double xi = 0.0;
  double weighted_value = 0.0;  // xi / P_L(level)
  std::uint64_t cost_steps = 0;
};

struct UpfResult {
  double mean = 0.0;
  double std_error = 0.0;
  std::vector<UpfReplicate> replicates;
  std::uint64_t total_cost = 0;
};

/// M independent single-term estimates Xi_L / P_L(L), averaged.
UpfResult upf_estimate(const ModelSpec& spec, const MarkedDataset& ds, long T,
                       const Randomization& rand, const TestFunction& phi, long M, SeedKey key,
                       Quadrature quadrature = Quadrature::Right);

/// Permutation-invariant mean: values are sorted before pairwise summation.
double canonical_mean(std::vector<double> values);
/// Sample variance (n-1 denominator) around canonical_mean.
double sample_variance(const std::vector<double>& values);

}  // namespace mppf
