#include "mppf/potentials.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mppf/error.hpp"

namespace mppf {

std::string_view to_string(Quadrature q) { return q == Quadrature::Left ? "left" : "right"; }

Quadrature parse_quadrature(std::string_view name) {
  if (name == "left") return Quadrature::Left;
  if (name == "right") return Quadrature::Right;
  throw ConfigError("quadrature must be 'left' or 'right', got '" + std::string(name) + "'");
}

ObservationSchedule::ObservationSchedule(const MarkedDataset& ds, int level)
    : level_(level), horizon_(ds.horizon_T) {
  const long total = ds.horizon_T * steps_per_unit(level);
  std::vector<long> counts(total, 0);
  std::vector<long> substep_of(ds.events.size());
  const double scale = std::ldexp(1.0, level);
  for (std::size_t i = 0; i < ds.events.size(); ++i) {
    const double s = ds.events[i].time;
    // (k Delta, (k+1) Delta] contains s; an event on a grid point closes the sub-step.
    long k = static_cast<long>(std::ceil(s * scale)) - 1;
    if (k < 0) k = 0;
    if (k >= total) throw ValidationError("event beyond the horizon");
    substep_of[i] = k;
    ++counts[k];
  }
  offsets_.assign(total + 1, 0);
  for (long k = 0; k < total; ++k) offsets_[k + 1] = offsets_[k] + counts[k];
  events_.resize(ds.events.size());
  std::vector<long> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t i = 0; i < ds.events.size(); ++i) {
    const long k = substep_of[i];
    // Same arithmetic as interpolate(): (s - p) * 2^l - k_local, all exact.
    const long n = steps_per_unit(level);
    const long p = k / n;
    const double scaled = (ds.events[i].time - static_cast<double>(p)) * scale;
    const double frac = scaled - static_cast<double>(k - p * n);
    events_[fill[k]++] = ScheduledEvent{frac, ds.events[i].mark};
  }
}

PotentialContext::PotentialContext(const ModelSpec& spec_in, const MarkedDataset& ds,
                                   int level_in, Quadrature quadrature_in)
    : spec(spec_in),
      level(level_in),
      quadrature(quadrature_in),
      horizon_T(ds.horizon_T),
      events(ds.events),
      schedule(ds, level_in) {
  if (level < 0) throw ConfigError("level must be >= 0");
  spec.validate();
}

double log_unit_potential(const PotentialContext& ctx, long p, const UnitPath& path) {
  if (path.start_time != p || path.level != ctx.level) {
    throw ConfigError("unit potential: path does not match (p, level)");
  }
  if (p < 0 || p >= ctx.horizon_T) throw RangeError("unit potential: p outside horizon");
  // Events in (p, p+1], located by time rather than through the schedule.
  double log_events = 0.0;
  for (const MarkedEvent& e : ctx.events) {
    if (e.time <= static_cast<double>(p) || e.time > static_cast<double>(p + 1)) continue;
    const double xs = interpolate(path, e.time);
    log_events += mark_logdensity(ctx.spec, xs, e.mark) + std::log(intensity(ctx.spec, xs));
  }
  const long n = steps_per_unit(ctx.level);
  double lambda_sum = 0.0;
  for (long k = 0; k < n; ++k) {
    const double x = ctx.quadrature == Quadrature::Right ? path.states[k + 1] : path.states[k];
    lambda_sum += intensity(ctx.spec, x);
  }
  return log_events - step_size(ctx.level) * lambda_sum;
}

double unit_potential(const PotentialContext& ctx, long p, const UnitPath& path) {
  return std::exp(log_unit_potential(ctx, p, path));
}

double log_substep_factor(const PotentialContext& ctx, long k, double x_left, double x_right) {
  const long total = ctx.horizon_T * steps_per_unit(ctx.level);
  if (k < 0 || k >= total) throw RangeError("substep factor: k outside horizon");
  double log_events = 0.0;
  for (const ScheduledEvent& e : ctx.schedule.substep(k)) {
    const double xs = interpolate_segment(x_left, x_right, e.frac);
    log_events += mark_logdensity(ctx.spec, xs, e.mark) + std::log(intensity(ctx.spec, xs));
  }
  const double x_quad = ctx.quadrature == Quadrature::Left ? x_left : x_right;
  return log_events - intensity(ctx.spec, x_quad) * step_size(ctx.level);
}

double substep_factor(const PotentialContext& ctx, long k, double x_left, double x_right) {
  return std::exp(log_substep_factor(ctx, k, x_left, x_right));
}

double euler_transition_logdensity(const ModelSpec& spec, int level, double x_from,
                                   double x_to) {
  const double sigma = diffusion_coeff(spec, x_from);
  if (sigma == 0.0) throw SingularityError("Euler transition with zero diffusion coefficient");
  const double dt = step_size(level);
  return detail::log_normal_pdf(x_to, x_from + drift(spec, x_from) * dt, sigma * sigma * dt);
}

}  // namespace mppf
