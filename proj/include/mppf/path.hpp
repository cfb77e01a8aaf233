#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "mppf/models.hpp"
#include "mppf/rng.hpp"

namespace mppf {

/// Delta_l = 2^-l.
inline double step_size(int level) { return std::ldexp(1.0, -level); }
/// Delta_l^-1 Euler steps per unit time.
inline long steps_per_unit(int level) { return 1L << level; }

/// One unit-time Euler path on [start_time, start_time + 1] at a dyadic level.
/// states has steps_per_unit(level) + 1 entries, increments one fewer; each
/// increment is the Brownian increment (variance Delta_l) of its step.
struct UnitPath {
  int level = 0;
  long start_time = 0;
  std::vector<double> states;
  std::vector<double> increments;

  double start() const { return states.front(); }
  double end() const { return states.back(); }
};

/// Euler recursion driven by caller-supplied Brownian increments.
UnitPath euler_from_increments(const ModelSpec& spec, int level, long start_time, double x0,
                               std::span<const double> increments);

/// Euler-Maruyama on one unit interval; draws Delta_l^-1 increments from rng.
UnitPath euler_unit(const ModelSpec& spec, int level, long start_time, double x0,
                    RandomStream& rng);

/// Synchronous coupling of levels l and l-1: the coarse path is driven by sums
/// of consecutive pairs of the fine increments. The fine path consumes rng
/// exactly like euler_unit(level).
std::pair<UnitPath, UnitPath> coupled_euler_unit(const ModelSpec& spec, int level,
                                                 long start_time, double x0_fine,
                                                 double x0_coarse, RandomStream& rng);

/// Linear interpolation between grid states; exact at grid times, including
/// the right end of each sub-step.
double interpolate(const UnitPath& path, double t);

}  // namespace mppf
