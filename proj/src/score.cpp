#include "mppf/score.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mppf/error.hpp"
#include "mppf/filters.hpp"
#include "mppf/parallel.hpp"

namespace mppf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxDim = 3;
using Vec = std::array<double, kMaxDim>;

/// Same gradients as theta_gradients, without allocation.
class GradKernel {
 public:
  explicit GradKernel(const ModelSpec& spec)
      : id_(spec.model_id),
        theta_lambda_(spec.theta.theta_lambda),
        theta_Sigma_(spec.theta.theta_Sigma),
        clip_(spec.clip),
        x_free_marks_(spec.model_id == ModelId::TestConst &&
                      spec.theta.fixed_or("x_independent_marks", 0.0) != 0.0) {
    const auto coords = score_coordinates(spec.model_id);
    dim_ = coords.size();
    for (std::size_t i = 0; i < coords.size(); ++i) {
      if (coords[i] == ThetaCoord::b) ib_ = static_cast<int>(i);
      if (coords[i] == ThetaCoord::lambda) il_ = static_cast<int>(i);
      if (coords[i] == ThetaCoord::Sigma) is_ = static_cast<int>(i);
    }
  }

  std::size_t dim() const { return dim_; }

  /// d b / d theta_b at x.
  double drift_grad(double x) const {
    if (id_ == ModelId::OU) return -x;
    if (id_ == ModelId::GBM) return x;
    return 0.0;
  }

  void add_drift(double x, double w_over_sigma, Vec& out) const {
    if (ib_ >= 0) out[ib_] += drift_grad(x) * w_over_sigma;
  }

  void add_event(double x, double y, Vec& out) const {
    if (il_ >= 0 && scaled(x)) {
      if (x == 0.0 || theta_lambda_ == 0.0) {
        throw SingularityError("event at a zero-intensity state");
      }
      out[il_] += 1.0 / theta_lambda_;
    }
    if (is_ >= 0) {
      const double d = y - (x_free_marks_ ? 0.0 : x);
      out[is_] += d * d / (2.0 * theta_Sigma_ * theta_Sigma_) - 1.0 / (2.0 * theta_Sigma_);
    }
  }

  void add_intensity(double x, double scale, Vec& out) const {
    if (il_ >= 0 && scaled(x)) out[il_] += scale * std::abs(x);
  }

 private:
  bool scaled(double x) const {
    if (id_ == ModelId::TestConst) return false;
    if (!clip_.enabled) return true;
    const double raw = theta_lambda_ * std::abs(x);
    return raw >= clip_.lo && raw <= clip_.hi;
  }

  ModelId id_;
  double theta_lambda_;
  double theta_Sigma_;
  IntensityClip clip_;
  bool x_free_marks_;
  std::size_t dim_ = 0;
  int ib_ = -1, il_ = -1, is_ = -1;
};

struct Advance {
  double x1;      // state after the first sub-step
  double x_end;
  double log_g;
  Vec rest{};     // f-terms of sub-steps 1..n-1
};

/// Same arithmetic as the PF propagation, plus the score terms after the
/// first sub-step.
Advance advance_unit(const ModelKernel& model, const GradKernel& grad,
                     const ObservationSchedule& sched, Quadrature quad, long p, double x,
                     RandomStream& rng) {
  const int level = sched.level();
  const long n = steps_per_unit(level);
  const double dt = step_size(level);
  const double sqrt_dt = std::sqrt(dt);
  const long base = p * n;
  Advance a{};
  double log_events = 0.0;
  double lambda_sum = 0.0;
  double xl = x;
  for (long k = 0; k < n; ++k) {
    const double z = sqrt_dt * rng.normal();
    const double s = model.diffusion(xl);
    const double xr = xl + model.drift(xl) * dt + s * z;
    const double xq = quad == Quadrature::Right ? xr : xl;
    for (const ScheduledEvent& e : sched.substep(base + k)) {
      const double xe = interpolate_segment(xl, xr, e.frac);
      log_events += model.log_event_weight(xe, e.mark);
      if (k > 0) grad.add_event(xe, e.mark, a.rest);
    }
    lambda_sum += model.intensity(xq);
    if (k > 0) {
      if (s == 0.0) throw SingularityError("score: zero diffusion coefficient");
      grad.add_drift(xl, z / s, a.rest);
      grad.add_intensity(xq, -dt, a.rest);
    } else {
      a.x1 = xr;
    }
    xl = xr;
  }
  if (!std::isfinite(xl)) {
    throw OverflowError(static_cast<std::size_t>(base + n), "score filter: non-finite state");
  }
  a.x_end = xl;
  a.log_g = log_events - dt * lambda_sum;
  return a;
}

/// Per-ancestor quantities of the first sub-step.
struct Origin {
  double x;
  double mean;       // x + b(x) Delta
  double inv_var;    // 1 / (sigma(x)^2 Delta)
  double log_norm;   // -log(2 pi var) / 2
  double drift_coef; // grad b(x) / sigma(x)^2
  double lambda_left;
};

Origin make_origin(const ModelKernel& model, const GradKernel& grad, double x, double dt) {
  const double s = model.diffusion(x);
  if (s == 0.0) throw SingularityError("score: zero diffusion coefficient");
  const double var = s * s * dt;
  return {x,
          x + model.drift(x) * dt,
          1.0 / var,
          -0.5 * std::log(2.0 * std::numbers::pi * var),
          grad.drift_grad(x) / (s * s),
          model.intensity(x)};
}

}  // namespace

std::vector<double> mu_increment(const ModelSpec& spec, int level, const UnitPath& path,
                                 const MarkedDataset& ds, Quadrature quadrature) {
  const long n = steps_per_unit(level);
  if (path.level != level || path.states.size() != static_cast<std::size_t>(n + 1) ||
      path.increments.size() != static_cast<std::size_t>(n)) {
    throw ConfigError("mu_increment: path does not carry its increments at this level");
  }
  const auto coords = score_coordinates(spec.model_id);
  const double dt = step_size(level);
  std::vector<double> out(coords.size(), 0.0);
  const double t0 = static_cast<double>(path.start_time);
  for (long k = 0; k < n; ++k) {
    const double xl = path.states[k];
    const double xq = quadrature == Quadrature::Right ? path.states[k + 1] : xl;
    const double s = diffusion_coeff(spec, xl);
    const auto g = theta_gradients(spec, xl);
    const auto gq = theta_gradients(spec, xq);
    for (std::size_t c = 0; c < coords.size(); ++c) {
      if (g.grad_drift[c] != 0.0) {
        if (s == 0.0) throw SingularityError("mu_increment: zero diffusion coefficient");
        out[c] += g.grad_drift[c] * path.increments[k] / s;
      }
      out[c] -= gq.grad_intensity[c] * dt;
    }
  }
  for (const MarkedEvent& e : ds.events) {
    if (e.time <= t0 || e.time > t0 + 1.0) continue;
    const double x = interpolate(path, e.time);
    const auto g = theta_gradients(spec, x, e.mark);
    for (std::size_t c = 0; c < coords.size(); ++c) out[c] += g.grad_log_mark_intensity[c];
  }
  return out;
}

ScoreFilter::ScoreFilter(const ModelSpec& spec, const MarkedDataset& ds, const ScoreConfig& cfg)
    : model_id_(spec.model_id),
      level_(cfg.level),
      N_(cfg.N),
      T_(cfg.T),
      quadrature_(cfg.quadrature),
      key_(cfg.key),
      coords_(score_coordinates(spec.model_id)),
      sched_(ds, cfg.level) {
  spec.validate();
  if (cfg.N < 2) throw ConfigError("score filter needs N >= 2");
  if (cfg.T < 1 || cfg.T > ds.horizon_T) throw ConfigError("score filter: T out of range");
  if (cfg.level < 0 || cfg.level > 30) throw ConfigError("score filter: level out of range");
  const auto N = static_cast<std::size_t>(N_);
  x_.assign(N, spec.x_star);
  log_g_.assign(N, 0.0);
  F_.assign(N * coords_.size(), 0.0);
  estimate_.assign(coords_.size(), 0.0);
}

const std::vector<double>& ScoreFilter::step(const ModelSpec& spec) {
  if (spec.model_id != model_id_) throw ConfigError("score filter: model changed mid-run");
  if (k_ >= T_) throw ConfigError("score filter: horizon exhausted");
  const ModelKernel model(spec);
  const GradKernel grad(spec);
  const auto N = static_cast<std::size_t>(N_);
  const std::size_t d = coords_.size();
  const auto level = static_cast<std::uint32_t>(level_);
  const double dt = step_size(level_);

  // Resampled cloud: endpoints and carried functionals.
  std::vector<double> xc(N);
  std::vector<double> Fc(N * d, 0.0);
  if (k_ == 0) {
    std::fill(xc.begin(), xc.end(), x_[0]);
  } else {
    RandomStream rs(key_, Purpose::Resample, level, 0, static_cast<std::uint64_t>(k_));
    const auto idx = ordered_multinomial_resample(x_, probs_, N_, rs);
    for (std::size_t i = 0; i < N; ++i) {
      xc[i] = x_[idx[i]];
      std::copy_n(F_.begin() + idx[i] * d, d, Fc.begin() + i * d);
    }
  }

  std::vector<Advance> adv(N);
  for (std::size_t i = 0; i < N; ++i) {
    RandomStream rng(key_, Purpose::Dynamics, level, i, static_cast<std::uint64_t>(k_));
    adv[i] = advance_unit(model, grad, sched_, quadrature_, k_, xc[i], rng);
  }
  cost_steps_ += pf_cost(level_, N_, 1);

  const auto first_events = sched_.substep(k_ * steps_per_unit(level_));
  // Distinct ancestors only: at k = 0 every particle starts at x_star.
  const std::size_t n_orig = k_ == 0 ? 1 : N;
  std::vector<Origin> orig(n_orig);
  for (std::size_t j = 0; j < n_orig; ++j) orig[j] = make_origin(model, grad, xc[j], dt);

  int ib = -1;
  for (std::size_t c = 0; c < d; ++c) {
    if (coords_[c] == ThetaCoord::b) ib = static_cast<int>(c);
  }

  std::vector<double> F_new(N * d, 0.0);
  std::vector<double> norm_err(N, 0.0);
  parallel_for(N, [&](std::size_t i) {
    const double x1 = adv[i].x1;
    const double lambda_right = model.intensity(x1);
    std::vector<double> lw(n_orig);
    std::vector<Vec> first(n_orig);
    double max_lw = kNegInf;
    for (std::size_t j = 0; j < n_orig; ++j) {
      const Origin& o = orig[j];
      const double r = x1 - o.mean;
      Vec f{};
      double ev = 0.0;
      for (const ScheduledEvent& e : first_events) {
        const double xe = interpolate_segment(o.x, x1, e.frac);
        ev += model.log_event_weight(xe, e.mark);
        grad.add_event(xe, e.mark, f);
      }
      const double lam = quadrature_ == Quadrature::Right ? lambda_right : o.lambda_left;
      const double xq = quadrature_ == Quadrature::Right ? x1 : o.x;
      // grad b(x) dW / sigma(x), dW implied by the pair (x, x1)
      if (ib >= 0) f[ib] += o.drift_coef * r;
      grad.add_intensity(xq, -dt, f);
      lw[j] = ev - dt * lam + o.log_norm - 0.5 * r * r * o.inv_var;
      first[j] = f;
      max_lw = std::max(max_lw, lw[j]);
    }
    if (!(max_lw > kNegInf)) {
      throw DegenerateWeightsError(k_, "backward weights vanish for particle " +
                                           std::to_string(i));
    }
    double total = 0.0;
    Vec acc{};
    for (std::size_t j = 0; j < n_orig; ++j) {
      const double w = std::exp(lw[j] - max_lw);
      lw[j] = w;
      total += w;
      const std::size_t src = k_ == 0 ? i : j;
      for (std::size_t c = 0; c < d; ++c) acc[c] += w * (Fc[src * d + c] + first[j][c]);
    }
    double check = 0.0;
    for (std::size_t j = 0; j < n_orig; ++j) check += lw[j] / total;
    norm_err[i] = std::abs(check - 1.0);
    for (std::size_t c = 0; c < d; ++c) F_new[i * d + c] = acc[c] / total + adv[i].rest[c];
  });
  if (k_ > 0) backward_pairs_ += static_cast<std::uint64_t>(N) * N;
  for (double e : norm_err) max_norm_error_ = std::max(max_norm_error_, e);

  for (std::size_t i = 0; i < N; ++i) {
    x_[i] = adv[i].x_end;
    log_g_[i] = adv[i].log_g;
  }
  F_.swap(F_new);
  if (!std::isfinite(normalize_log_weights(log_g_, probs_))) {
    throw DegenerateWeightsError(k_, "score filter: all particle weights are zero");
  }
  std::fill(estimate_.begin(), estimate_.end(), 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    if (probs_[i] == 0.0) continue;
    for (std::size_t c = 0; c < d; ++c) estimate_[c] += probs_[i] * F_[i * d + c];
  }
  ++k_;
  return estimate_;
}

ScoreOutput run_score_filter(const ModelSpec& spec, const MarkedDataset& ds,
                             const ScoreConfig& cfg) {
  ScoreFilter filter(spec, ds, cfg);
  ScoreOutput out;
  out.coordinates = filter.coordinates();
  for (long t = 0; t < cfg.T; ++t) out.estimates.push_back(filter.step(spec));
  out.cost_steps = filter.cost_steps();
  out.backward_pairs = filter.backward_pairs();
  return out;
}

void SgaConfig::validate(std::size_t dim) const {
  if (alpha0.size() != dim) throw ConfigError("alpha0 needs one entry per score coordinate");
  for (double a : alpha0) {
    if (!(a > 0.0)) throw ConfigError("alpha0 entries must be > 0");
  }
  if (!(beta > 0.5 && beta <= 1.0)) throw ConfigError("beta must lie in (0.5, 1]");
  if (window_c < 1) throw ConfigError("window c must be >= 1");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!floors.empty() && floors.size() != dim) throw ConfigError("floors size mismatch");
}

double sga_step_factor(double beta, long m) {
  return std::pow(static_cast<double>(m + 1), -beta);
}

std::vector<double> default_floors(const std::vector<ThetaCoord>& coords) {
  std::vector<double> f;
  for (ThetaCoord c : coords) {
    f.push_back(c == ThetaCoord::b ? -std::numeric_limits<double>::infinity() : 1e-4);
  }
  return f;
}

SgaResult sga_run(const ModelSpec& spec_template, const MarkedDataset& ds, int level, long N,
                  const SgaConfig& cfg, SeedKey key, Quadrature quadrature) {
  SgaResult res;
  res.coordinates = score_coordinates(spec_template.model_id);
  const std::size_t d = res.coordinates.size();
  cfg.validate(d);
  const long horizon = cfg.window_c * cfg.iterations;
  if (horizon > ds.horizon_T) throw ConfigError("dataset horizon shorter than c * iterations");
  for (std::size_t c = 0; c < d; ++c) {
    if ((res.coordinates[c] == ThetaCoord::lambda || res.coordinates[c] == ThetaCoord::Sigma) &&
        !cfg.floors.empty() && !(cfg.floors[c] > 0.0)) {
      throw ConfigError("floors for theta_lambda and theta_Sigma must be > 0");
    }
  }
  const auto floors = cfg.floors.empty() ? default_floors(res.coordinates) : cfg.floors;

  ModelSpec spec = spec_template;
  spec.theta.theta_b = cfg.theta_init.theta_b;
  spec.theta.theta_lambda = cfg.theta_init.theta_lambda;
  spec.theta.theta_Sigma = cfg.theta_init.theta_Sigma;

  ScoreConfig sc;
  sc.level = level;
  sc.N = N;
  sc.T = horizon;
  sc.quadrature = quadrature;
  sc.key = key;
  ScoreFilter filter(spec, ds, sc);

  std::vector<double> previous(d, 0.0);
  for (long m = 0; m < cfg.iterations; ++m) {
    SgaIteration it;
    it.m = m;
    for (ThetaCoord c : res.coordinates) it.theta.push_back(get_coord(spec, c));
    std::vector<double> current;
    for (long s = 0; s < cfg.window_c; ++s) current = filter.step(spec);
    it.step_factor = sga_step_factor(cfg.beta, m);
    for (std::size_t c = 0; c < d; ++c) {
      it.score.push_back(current[c] - previous[c]);
      double v = it.theta[c] + cfg.alpha0[c] * it.step_factor * it.score[c];
      if (v < floors[c]) {
        v = floors[c];
        it.projected = true;
      }
      set_coord(spec, res.coordinates[c], v);
    }
    if (it.projected) ++res.projections;
    previous = current;
    res.iterations.push_back(std::move(it));
  }
  for (ThetaCoord c : res.coordinates) res.theta_final.push_back(get_coord(spec, c));
  res.cost_steps = filter.cost_steps();
  return res;
}

}  // namespace mppf
