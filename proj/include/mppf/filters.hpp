#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mppf/dataset.hpp"
#include "mppf/models.hpp"
#include "mppf/potentials.hpp"
#include "mppf/rng.hpp"

namespace mppf {

using TestFunction = std::function<double(double)>;

inline TestFunction identity_function() {
  return [](double x) { return x; };
}

/// Draws n_draws i.i.d. indices from nonnegative weights (need not be
/// normalized). Throws DegenerateWeightsError if the weights sum to zero.
std::vector<long> multinomial_resample(std::span<const double> weights, long n_draws,
                                       RandomStream& rng);

/// Multinomial resampling with the inverse CDF taken over particles ordered
/// by state, so a small change in the weights moves ancestors to neighbouring
/// states. Same law as multinomial_resample; returns original indices.
std::vector<long> ordered_multinomial_resample(std::span<const double> states,
                                               std::span<const double> weights, long n_draws,
                                               RandomStream& rng);

struct CoupledIndices {
  std::vector<long> fine;
  std::vector<long> coarse;
  std::vector<bool> met;
};

/// Maximal coupling of two categorical laws: with probability sum_i min(W1,W2)
/// both indices come from the normalized min-measure, otherwise independently
/// from the two normalized residuals. Both inputs must sum to 1 within 1e-12.
CoupledIndices maximal_coupling_resample(std::span<const double> w_fine,
                                         std::span<const double> w_coarse, long n_draws,
                                         RandomStream& rng);

/// Self-normalized weighted mean of phi over the endpoints; weights are given
/// as log-weights (-inf allowed).
double estimate(std::span<const double> log_weights, std::span<const double> endpoints,
                const TestFunction& phi);

/// Normalizes log-weights to probabilities (max subtracted before exp).
/// Returns log(sum_i exp(log_w_i)).
double normalize_log_weights(std::span<const double> log_weights, std::vector<double>& out);

/// Cloud at the final unit time: log G_{T-1} of each particle and its endpoint x_T.
struct WeightedCloud {
  std::vector<double> log_weights;
  std::vector<double> endpoints;
};

struct FilterConfig {
  int level = 0;
  long N = 1;
  long T = 1;
  Quadrature quadrature = Quadrature::Right;
  SeedKey key;
  std::vector<TestFunction> test_functions{identity_function()};
};

struct FilterOutput {
  /// estimates[t-1][f]: weighted estimate of phi_f at integer time t (for the
  /// CPF, the fine-minus-coarse difference).
  std::vector<std::vector<double>> estimates;
  /// Cumulative log of prod_p (1/N) sum_i G_p^i up to each t (fine level for CPF).
  std::vector<double> log_normalizer;
  std::uint64_t cost_steps = 0;
  WeightedCloud terminal;         // fine / single level
  WeightedCloud terminal_coarse;  // CPF only
  /// CPF only: pairs that met at each coupled resampling (fraction per time).
  std::vector<double> meet_fraction;
};

/// Bootstrap particle filter with multinomial resampling at every unit time.
FilterOutput run_pf(const ModelSpec& spec, const MarkedDataset& ds, const FilterConfig& cfg);

/// Coupled particle filter for levels (l, l-1), l >= 1.
FilterOutput run_cpf(const ModelSpec& spec, const MarkedDataset& ds, const FilterConfig& cfg);

/// Euler sub-steps a filter run consumes.
std::uint64_t pf_cost(int level, long N, long T);
std::uint64_t cpf_cost(int level, long N, long T);

}  // namespace mppf
