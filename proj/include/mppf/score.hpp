#pragma once

#include <cstdint>
#include <vector>

#include "mppf/dataset.hpp"
#include "mppf/models.hpp"
#include "mppf/path.hpp"
#include "mppf/potentials.hpp"
#include "mppf/rng.hpp"

namespace mppf {

/// Additive score functional of one unit path, one entry per
/// score_coordinates(model). Per sub-step: grad b(x) Z / sigma(x), plus
/// grad log(g lambda) at each event (interpolated state), minus
/// grad lambda * Delta at the quadrature endpoint.
std::vector<double> mu_increment(const ModelSpec& spec, int level, const UnitPath& path,
                                 const MarkedDataset& ds,
                                 Quadrature quadrature = Quadrature::Right);

struct ScoreConfig {
  int level = 0;
  long N = 2;
  long T = 1;
  Quadrature quadrature = Quadrature::Right;
  SeedKey key;
};

struct ScoreOutput {
  std::vector<ThetaCoord> coordinates;
  std::vector<std::vector<double>> estimates;  // [t-1][coordinate]
  std::uint64_t cost_steps = 0;                // Euler sub-steps
  std::uint64_t backward_pairs = 0;            // (j, i) backward-kernel evaluations
};

/// Online score filter. Its particle system consumes the same random streams
/// as run_pf with the same key, so the forward cloud coincides with the PF.
class ScoreFilter {
 public:
  ScoreFilter(const ModelSpec& spec, const MarkedDataset& ds, const ScoreConfig& cfg);

  /// Advances over (k, k+1] using spec (only theta may differ from the
  /// constructor's spec) and returns the estimate of the score at k+1.
  const std::vector<double>& step(const ModelSpec& spec);

  long time() const { return k_; }
  const std::vector<ThetaCoord>& coordinates() const { return coords_; }
  std::uint64_t cost_steps() const { return cost_steps_; }
  std::uint64_t backward_pairs() const { return backward_pairs_; }
  /// Largest |sum_j w_ij - 1| seen over all backward normalizations.
  double max_backward_norm_error() const { return max_norm_error_; }

 private:
  ModelId model_id_;
  int level_;
  long N_;
  long T_;
  Quadrature quadrature_;
  SeedKey key_;
  std::vector<ThetaCoord> coords_;
  ObservationSchedule sched_;
  long k_ = 0;

  std::vector<double> x_;       // endpoints x_k of the current cloud
  std::vector<double> log_g_;   // log G of the current cloud
  std::vector<double> F_;       // N x d, row-major
  std::vector<double> probs_;
  std::vector<double> estimate_;
  std::uint64_t cost_steps_ = 0;
  std::uint64_t backward_pairs_ = 0;
  double max_norm_error_ = 0.0;
};

ScoreOutput run_score_filter(const ModelSpec& spec, const MarkedDataset& ds,
                             const ScoreConfig& cfg);

struct SgaConfig {
  std::vector<double> alpha0;   // one per score coordinate
  double beta = 0.6;            // in (0.5, 1]
  long window_c = 1;
  long iterations = 1;
  ThetaVector theta_init;
  std::vector<double> floors;   // lower bounds per coordinate; empty = defaults

  void validate(std::size_t dim) const;
};

/// alpha_m^{(i)} = alpha0^{(i)} (m + 1)^{-beta}; this returns (m + 1)^{-beta}.
double sga_step_factor(double beta, long m);

/// Default floors: 1e-4 for theta_lambda and theta_Sigma, unbounded for theta_b.
std::vector<double> default_floors(const std::vector<ThetaCoord>& coords);

struct SgaIteration {
  long m = 0;
  std::vector<double> theta;  // theta_m
  std::vector<double> score;  // score at c(m+1) minus score at cm
  double step_factor = 0.0;   // (m+1)^{-beta}
  bool projected = false;
};

struct SgaResult {
  std::vector<ThetaCoord> coordinates;
  std::vector<SgaIteration> iterations;
  std::vector<double> theta_final;
  long projections = 0;
  std::uint64_t cost_steps = 0;
};

SgaResult sga_run(const ModelSpec& spec_template, const MarkedDataset& ds, int level, long N,
                  const SgaConfig& cfg, SeedKey key, Quadrature quadrature = Quadrature::Right);

}  // namespace mppf
