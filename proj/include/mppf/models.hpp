#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mppf/error.hpp"

namespace mppf {

enum class ModelId { OU, Langevin, NLDT, GBM, TestConst };

std::string_view to_string(ModelId id);
ModelId parse_model_id(std::string_view name);

/// Static parameters. fixed_params holds the non-estimated constants:
/// "sigma" (OU, GBM), "nu" (Langevin), "c" and "x_independent_marks" (TestConst).
struct ThetaVector {
  double theta_b = 0.0;
  double theta_lambda = 0.0;
  double theta_Sigma = 1.0;
  std::map<std::string, double> fixed_params;

  double fixed(const std::string& name) const;
  double fixed_or(const std::string& name, double fallback) const;
};

/// Optional clipping of the intensity into [lo, hi].
struct IntensityClip {
  bool enabled = false;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
};

struct ModelSpec {
  ModelId model_id = ModelId::OU;
  double x_star = 0.0;
  ThetaVector theta;
  IntensityClip clip;

  /// Throws ConfigError if an invariant is violated.
  void validate() const;
};

/// Default parameters per model, x_star = 1 and theta_Sigma = 1 throughout:
/// OU (theta_b 0.98, theta_lambda 3.5, sigma 1), Langevin (theta_lambda 1, nu 10),
/// NLDT (theta_lambda 0.222), GBM (theta_b 0.015, theta_lambda 0.5, sigma 0.2),
/// TestConst (x_star 0, c 1).
ModelSpec default_model(ModelId id);

/// Coordinates of theta that the score and SGA act on, in output order.
enum class ThetaCoord { b, lambda, Sigma };
std::string_view to_string(ThetaCoord c);
std::vector<ThetaCoord> score_coordinates(ModelId id);

double get_coord(const ModelSpec& spec, ThetaCoord c);
void set_coord(ModelSpec& spec, ThetaCoord c, double value);

double drift(const ModelSpec& spec, double x);
double diffusion_coeff(const ModelSpec& spec, double x);
double intensity(const ModelSpec& spec, double x);
/// Mean of the Gaussian mark density at state x (x itself, or 0 for
/// TestConst with x-independent marks).
double mark_mean(const ModelSpec& spec, double x);
double mark_logdensity(const ModelSpec& spec, double x, double y);

struct ThetaGradients {
  std::vector<double> grad_drift;
  std::vector<double> grad_log_mark_intensity;  // empty when no mark supplied
  std::vector<double> grad_intensity;
};

/// All score coordinates, or only the one named by `only` (the others stay 0).
/// Throws SingularityError when the theta_lambda term of log(g lambda) is
/// requested at a zero-intensity state.
ThetaGradients theta_gradients(const ModelSpec& spec, double x,
                               std::optional<double> y = std::nullopt,
                               std::optional<ThetaCoord> only = std::nullopt);

namespace detail {

inline double log_normal_pdf(double y, double mean, double variance) {
  const double d = y - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - 0.5 * d * d / variance;
}

}  // namespace detail

/// Flattened, branch-light view of a ModelSpec for inner loops. Holds the same
/// formulas as the free functions above; tests pin the two together.
class ModelKernel {
 public:
  explicit ModelKernel(const ModelSpec& spec);

  double drift(double x) const {
    switch (id_) {
      case ModelId::OU: return -theta_b_ * x;
      case ModelId::Langevin: return (nu_ + 1.0) * x / (x * x + nu_);
      case ModelId::GBM: return theta_b_ * x;
      case ModelId::NLDT:
      case ModelId::TestConst: return 0.0;
    }
    return 0.0;
  }

  double diffusion(double x) const {
    switch (id_) {
      case ModelId::OU: return sigma_;
      case ModelId::NLDT: return 1.0 / std::sqrt(1.0 + x * x);
      case ModelId::GBM: return sigma_ * x;
      case ModelId::Langevin:
      case ModelId::TestConst: return 1.0;
    }
    return 1.0;
  }

  double intensity(double x) const {
    const double raw = id_ == ModelId::TestConst ? const_level_ : theta_lambda_ * std::abs(x);
    if (!clip_.enabled) return raw;
    return std::min(std::max(raw, clip_.lo), clip_.hi);
  }

  double mark_mean(double x) const { return x_free_marks_ ? 0.0 : x; }

  double mark_logdensity(double x, double y) const {
    return detail::log_normal_pdf(y, mark_mean(x), theta_Sigma_);
  }

  /// log(g(x, y) * lambda(x)); -inf when the intensity vanishes.
  double log_event_weight(double x, double y) const {
    return mark_logdensity(x, y) + std::log(intensity(x));
  }

  ModelId id() const { return id_; }
  double x_star() const { return x_star_; }
  double theta_Sigma() const { return theta_Sigma_; }

 private:
  ModelId id_;
  double x_star_;
  double theta_b_;
  double theta_lambda_;
  double theta_Sigma_;
  double sigma_;
  double nu_;
  double const_level_;
  bool x_free_marks_;
  IntensityClip clip_;
};

}  // namespace mppf
