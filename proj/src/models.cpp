#include "mppf/models.hpp"

#include <algorithm>
#include <array>

namespace mppf {

namespace {

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw DomainError(std::string(what) + ": non-finite state");
}

bool clipped(const ModelSpec& spec, double raw) {
  return spec.clip.enabled && (raw < spec.clip.lo || raw > spec.clip.hi);
}

double raw_intensity(const ModelSpec& spec, double x) {
  if (spec.model_id == ModelId::TestConst) return spec.theta.fixed("c");
  return spec.theta.theta_lambda * std::abs(x);
}

}  // namespace

std::string_view to_string(ModelId id) {
  switch (id) {
    case ModelId::OU: return "OU";
    case ModelId::Langevin: return "Langevin";
    case ModelId::NLDT: return "NLDT";
    case ModelId::GBM: return "GBM";
    case ModelId::TestConst: return "TestConst";
  }
  return "?";
}

ModelId parse_model_id(std::string_view name) {
  for (ModelId id : {ModelId::OU, ModelId::Langevin, ModelId::NLDT, ModelId::GBM,
                     ModelId::TestConst}) {
    if (name == to_string(id)) return id;
  }
  throw ConfigError("unknown model '" + std::string(name) + "'");
}

double ThetaVector::fixed(const std::string& name) const {
  auto it = fixed_params.find(name);
  if (it == fixed_params.end()) throw ConfigError("missing fixed parameter '" + name + "'");
  return it->second;
}

double ThetaVector::fixed_or(const std::string& name, double fallback) const {
  auto it = fixed_params.find(name);
  return it == fixed_params.end() ? fallback : it->second;
}

void ModelSpec::validate() const {
  if (!(theta.theta_Sigma > 0.0)) throw ConfigError("theta_Sigma must be > 0");
  if (!(theta.theta_lambda >= 0.0)) throw ConfigError("theta_lambda must be >= 0");
  if (!std::isfinite(x_star)) throw ConfigError("x_star must be finite");
  switch (model_id) {
    case ModelId::OU:
      if (!(theta.fixed("sigma") >= 0.0)) throw ConfigError("OU sigma must be >= 0");
      break;
    case ModelId::GBM:
      if (x_star < 0.0) throw ConfigError("GBM requires x_star >= 0");
      if (!(theta.fixed("sigma") > 0.0)) throw ConfigError("GBM sigma must be > 0");
      break;
    case ModelId::Langevin:
      if (!(theta.fixed("nu") > 0.0)) throw ConfigError("Langevin nu must be > 0");
      break;
    case ModelId::TestConst:
      if (!(theta.fixed("c") > 0.0)) throw ConfigError("TestConst requires c > 0");
      break;
    case ModelId::NLDT: break;
  }
  if (clip.enabled && !(clip.lo <= clip.hi)) throw ConfigError("intensity clip needs lo <= hi");
}

ModelSpec default_model(ModelId id) {
  ModelSpec spec;
  spec.model_id = id;
  spec.x_star = 1.0;
  spec.theta.theta_Sigma = 1.0;
  switch (id) {
    case ModelId::OU:
      spec.theta.theta_b = 0.98;
      spec.theta.theta_lambda = 3.5;
      spec.theta.fixed_params["sigma"] = 1.0;
      break;
    case ModelId::Langevin:
      spec.theta.theta_lambda = 1.0;
      spec.theta.fixed_params["nu"] = 10.0;
      break;
    case ModelId::NLDT:
      spec.theta.theta_lambda = 0.222;
      break;
    case ModelId::GBM:
      spec.theta.theta_b = 0.015;
      spec.theta.theta_lambda = 0.5;
      spec.theta.fixed_params["sigma"] = 0.2;
      break;
    case ModelId::TestConst:
      spec.x_star = 0.0;
      spec.theta.fixed_params["c"] = 1.0;
      break;
  }
  return spec;
}

std::string_view to_string(ThetaCoord c) {
  switch (c) {
    case ThetaCoord::b: return "theta_b";
    case ThetaCoord::lambda: return "theta_lambda";
    case ThetaCoord::Sigma: return "theta_Sigma";
  }
  return "?";
}

std::vector<ThetaCoord> score_coordinates(ModelId id) {
  switch (id) {
    case ModelId::OU:
    case ModelId::GBM: return {ThetaCoord::b, ThetaCoord::lambda, ThetaCoord::Sigma};
    case ModelId::Langevin:
    case ModelId::NLDT: return {ThetaCoord::lambda, ThetaCoord::Sigma};
    // Constant intensity: the single coordinate carries no information.
    case ModelId::TestConst: return {ThetaCoord::lambda};
  }
  return {};
}

double get_coord(const ModelSpec& spec, ThetaCoord c) {
  switch (c) {
    case ThetaCoord::b: return spec.theta.theta_b;
    case ThetaCoord::lambda: return spec.theta.theta_lambda;
    case ThetaCoord::Sigma: return spec.theta.theta_Sigma;
  }
  return 0.0;
}

void set_coord(ModelSpec& spec, ThetaCoord c, double value) {
  switch (c) {
    case ThetaCoord::b: spec.theta.theta_b = value; break;
    case ThetaCoord::lambda: spec.theta.theta_lambda = value; break;
    case ThetaCoord::Sigma: spec.theta.theta_Sigma = value; break;
  }
}

double drift(const ModelSpec& spec, double x) {
  require_finite(x, "drift");
  switch (spec.model_id) {
    case ModelId::OU: return -spec.theta.theta_b * x;
    case ModelId::Langevin: {
      const double nu = spec.theta.fixed("nu");
      return (nu + 1.0) * x / (x * x + nu);
    }
    case ModelId::GBM: return spec.theta.theta_b * x;
    case ModelId::NLDT:
    case ModelId::TestConst: return 0.0;
  }
  return 0.0;
}

double diffusion_coeff(const ModelSpec& spec, double x) {
  require_finite(x, "diffusion_coeff");
  switch (spec.model_id) {
    case ModelId::OU: return spec.theta.fixed("sigma");
    case ModelId::NLDT: return 1.0 / std::sqrt(1.0 + x * x);
    case ModelId::GBM: return spec.theta.fixed("sigma") * x;
    case ModelId::Langevin:
    case ModelId::TestConst: return 1.0;
  }
  return 1.0;
}

double intensity(const ModelSpec& spec, double x) {
  require_finite(x, "intensity");
  const double raw = raw_intensity(spec, x);
  if (!spec.clip.enabled) return raw;
  return std::clamp(raw, spec.clip.lo, spec.clip.hi);
}

double mark_mean(const ModelSpec& spec, double x) {
  if (spec.model_id == ModelId::TestConst &&
      spec.theta.fixed_or("x_independent_marks", 0.0) != 0.0) {
    return 0.0;
  }
  return x;
}

double mark_logdensity(const ModelSpec& spec, double x, double y) {
  if (!(spec.theta.theta_Sigma > 0.0)) throw ConfigError("theta_Sigma must be > 0");
  return detail::log_normal_pdf(y, mark_mean(spec, x), spec.theta.theta_Sigma);
}

ThetaGradients theta_gradients(const ModelSpec& spec, double x, std::optional<double> y,
                               std::optional<ThetaCoord> only) {
  require_finite(x, "theta_gradients");
  const auto coords = score_coordinates(spec.model_id);
  ThetaGradients out;
  out.grad_drift.assign(coords.size(), 0.0);
  out.grad_intensity.assign(coords.size(), 0.0);
  if (y) out.grad_log_mark_intensity.assign(coords.size(), 0.0);

  const bool lambda_scaled =
      spec.model_id != ModelId::TestConst && !clipped(spec, raw_intensity(spec, x));
  const double sigma_mark = spec.theta.theta_Sigma;

  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (only && coords[i] != *only) continue;
    switch (coords[i]) {
      case ThetaCoord::b:
        if (spec.model_id == ModelId::OU) out.grad_drift[i] = -x;
        if (spec.model_id == ModelId::GBM) out.grad_drift[i] = x;
        break;
      case ThetaCoord::lambda:
        if (lambda_scaled) {
          out.grad_intensity[i] = std::abs(x);
          if (y) {
            if (x == 0.0 || spec.theta.theta_lambda == 0.0) {
              throw SingularityError("event at a zero-intensity state");
            }
            out.grad_log_mark_intensity[i] = 1.0 / spec.theta.theta_lambda;
          }
        }
        break;
      case ThetaCoord::Sigma:
        if (y) {
          const double d = *y - mark_mean(spec, x);
          out.grad_log_mark_intensity[i] =
              d * d / (2.0 * sigma_mark * sigma_mark) - 1.0 / (2.0 * sigma_mark);
        }
        break;
    }
  }
  return out;
}

ModelKernel::ModelKernel(const ModelSpec& spec)
    : id_(spec.model_id),
      x_star_(spec.x_star),
      theta_b_(spec.theta.theta_b),
      theta_lambda_(spec.theta.theta_lambda),
      theta_Sigma_(spec.theta.theta_Sigma),
      sigma_(spec.theta.fixed_or("sigma", 1.0)),
      nu_(spec.theta.fixed_or("nu", 10.0)),
      const_level_(spec.theta.fixed_or("c", 1.0)),
      x_free_marks_(spec.model_id == ModelId::TestConst &&
                    spec.theta.fixed_or("x_independent_marks", 0.0) != 0.0),
      clip_(spec.clip) {
  spec.validate();
}

}  // namespace mppf
