#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "mppf/dataset.hpp"
#include "mppf/models.hpp"
#include "mppf/path.hpp"

namespace mppf {

/// Which grid point of each sub-step carries the integrated-intensity term:
/// Right sums lambda(x_{p+(k+1)Delta}) (the unit-potential display); Left sums
/// lambda(x_{p+k Delta}) (the discretized-filter display).
enum class Quadrature { Left, Right };

std::string_view to_string(Quadrature q);
Quadrature parse_quadrature(std::string_view name);

/// An observation attributed to one Euler sub-step of a given level.
struct ScheduledEvent {
  double frac = 0.0;  // position inside the sub-step, in (0, 1]
  double mark = 0.0;
};

/// Events bucketed by global sub-step index k, i.e. by (k Delta, (k+1) Delta].
class ObservationSchedule {
 public:
  ObservationSchedule() = default;
  ObservationSchedule(const MarkedDataset& ds, int level);

  int level() const { return level_; }
  long horizon() const { return horizon_; }

  std::span<const ScheduledEvent> substep(long k) const {
    return {events_.data() + offsets_[k], events_.data() + offsets_[k + 1]};
  }
  std::span<const ScheduledEvent> unit(long p) const {
    const long n = steps_per_unit(level_);
    return {events_.data() + offsets_[p * n], events_.data() + offsets_[(p + 1) * n]};
  }

 private:
  int level_ = 0;
  long horizon_ = 0;
  std::vector<ScheduledEvent> events_;
  std::vector<long> offsets_;
};

/// Value on the segment between xl and xr at relative position frac; the
/// right end is returned exactly.
inline double interpolate_segment(double xl, double xr, double frac) {
  return frac == 1.0 ? xr : xl + (xr - xl) * frac;
}

struct PotentialContext {
  PotentialContext(const ModelSpec& spec, const MarkedDataset& ds, int level,
                   Quadrature quadrature = Quadrature::Right);

  ModelSpec spec;
  int level;
  Quadrature quadrature;
  long horizon_T;
  std::vector<MarkedEvent> events;  // copy of the observation record
  ObservationSchedule schedule;
};

/// log G_p^l for the unit path on (p, p+1]. Events use the interpolated path.
/// -inf when an event falls on a zero-intensity state.
double log_unit_potential(const PotentialContext& ctx, long p, const UnitPath& path);
double unit_potential(const PotentialContext& ctx, long p, const UnitPath& path);

/// log of the sub-step factor: product of g*lambda over events in the global
/// sub-step k, times exp(-lambda(x) Delta) at the quadrature endpoint.
double log_substep_factor(const PotentialContext& ctx, long k, double x_left, double x_right);
double substep_factor(const PotentialContext& ctx, long k, double x_left, double x_right);

/// log density of one Euler step x_from -> x_to at the given level.
double euler_transition_logdensity(const ModelSpec& spec, int level, double x_from,
                                   double x_to);

}  // namespace mppf
