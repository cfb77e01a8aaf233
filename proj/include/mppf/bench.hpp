#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "mppf/filters.hpp"
#include "mppf/mlmc.hpp"

namespace mppf {

/// Ordinary least squares of y on x; residual is the RMS of the fit residuals.
struct RateFit {
  std::vector<std::pair<double, double>> points;
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
};

/// Needs at least 3 points with distinct abscissae.
RateFit fit_rate(std::vector<std::pair<double, double>> points);

struct ReferenceConfig {
  int level = 9;
  long N = 1000000;
  int R = 20;
  SeedKey key{0x5EEDu};
  Quadrature quadrature = Quadrature::Right;
  /// If set, a standard error above tolerance / 3 raises UnderResolvedError.
  std::optional<double> tolerance;
};

/// Level data_level - 1 (at least 0), N = 10^6, R = 20.
ReferenceConfig default_reference_config(const MarkedDataset& ds);

struct ReferenceValue {
  double mean = 0.0;
  double std_error = 0.0;
  std::vector<double> values;  // per seed, in seed order
  std::uint64_t cost_steps = 0;
};

/// Mean over R independent PF runs of the estimate of phi at time T.
ReferenceValue reference_value(const ModelSpec& spec, const MarkedDataset& ds, long T,
                               const TestFunction& phi, const ReferenceConfig& cfg);

enum class Estimator { PF, MLPF, UPF };
std::string_view to_string(Estimator e);
Estimator parse_estimator(std::string_view name);

struct MseConfig {
  Estimator estimator = Estimator::PF;
  /// epsilon values for pf and mlpf, replicate counts M for upf.
  std::vector<double> targets;
  int reps = 10;
  long T = 10;
  int l0 = 0;
  /// pf: N = ceil(pf_constant eps^-2) at the smallest level L >= l0 with Delta_L <= eps.
  double pf_constant = 1.0;
  /// mlpf: allocation constant C.
  double ml_constant = 1.0;
  Randomization randomization = default_randomization();
  Quadrature quadrature = Quadrature::Right;
  SeedKey key{1};
  TestFunction phi = identity_function();
};

struct MseRow {
  double target = 0.0;
  double mse = 0.0;
  double mean_cost = 0.0;
  long reps = 0;
  double mean_estimate = 0.0;
};

/// R replicates per target; MSE against the fixed reference value.
std::vector<MseRow> mse_cost_experiment(const ModelSpec& spec, const MarkedDataset& ds,
                                        double reference, const MseConfig& cfg);

enum class DecayKind { CouplingVariance, WeakBias };
std::string_view to_string(DecayKind k);
DecayKind parse_decay_kind(std::string_view name);

struct DecayConfig {
  DecayKind kind = DecayKind::CouplingVariance;
  std::vector<int> levels;
  long N = 1000;
  int R = 200;
  long T = 10;
  Quadrature quadrature = Quadrature::Right;
  SeedKey key{2};
  TestFunction phi = identity_function();
  /// Required for weak_bias.
  std::optional<ReferenceValue> reference;
};

struct DecayRow {
  int level = 0;
  double value = 0.0;     // variance or |bias|
  double mc_error = 0.0;  // standard error of value
  bool flagged = false;   // weak_bias: mc_error >= value / 3
  double mean_estimate = 0.0;
  std::uint64_t cost_steps = 0;
};

struct DecayResult {
  std::vector<DecayRow> rows;
  /// log2(value) against level over unflagged rows with value > 0, when at
  /// least 3 remain.
  std::optional<RateFit> fit;
};

DecayResult decay_experiment(const ModelSpec& spec, const MarkedDataset& ds,
                             const DecayConfig& cfg);

}  // namespace mppf
