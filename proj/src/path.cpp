#include "mppf/path.hpp"

#include <string>

#include "mppf/error.hpp"

namespace mppf {

namespace {

void check_level(int level, int min_level) {
  if (level < min_level || level > 30) {
    throw ConfigError("level " + std::to_string(level) + " out of range");
  }
}

}  // namespace

UnitPath euler_from_increments(const ModelSpec& spec, int level, long start_time, double x0,
                               std::span<const double> increments) {
  check_level(level, 0);
  if (!std::isfinite(x0)) throw DomainError("euler: non-finite start state");
  const long n = steps_per_unit(level);
  if (static_cast<long>(increments.size()) != n) {
    throw ConfigError("euler: expected " + std::to_string(n) + " increments");
  }
  const ModelKernel model(spec);
  const double dt = step_size(level);
  UnitPath path{level, start_time, {}, {increments.begin(), increments.end()}};
  path.states.resize(n + 1);
  double x = x0;
  path.states[0] = x;
  for (long k = 0; k < n; ++k) {
    x = x + model.drift(x) * dt + model.diffusion(x) * increments[k];
    if (!std::isfinite(x)) throw OverflowError(k + 1, "euler: non-finite state");
    path.states[k + 1] = x;
  }
  return path;
}

UnitPath euler_unit(const ModelSpec& spec, int level, long start_time, double x0,
                    RandomStream& rng) {
  check_level(level, 0);
  const long n = steps_per_unit(level);
  const double sqrt_dt = std::sqrt(step_size(level));
  std::vector<double> z(n);
  for (double& v : z) v = sqrt_dt * rng.normal();
  return euler_from_increments(spec, level, start_time, x0, z);
}

std::pair<UnitPath, UnitPath> coupled_euler_unit(const ModelSpec& spec, int level,
                                                 long start_time, double x0_fine,
                                                 double x0_coarse, RandomStream& rng) {
  check_level(level, 1);
  UnitPath fine = euler_unit(spec, level, start_time, x0_fine, rng);
  const long n_coarse = steps_per_unit(level - 1);
  std::vector<double> z(n_coarse);
  for (long k = 0; k < n_coarse; ++k) {
    z[k] = fine.increments[2 * k] + fine.increments[2 * k + 1];
  }
  UnitPath coarse = euler_from_increments(spec, level - 1, start_time, x0_coarse, z);
  return {std::move(fine), std::move(coarse)};
}

double interpolate(const UnitPath& path, double t) {
  const double offset = t - static_cast<double>(path.start_time);
  if (!(offset >= 0.0 && offset <= 1.0)) {
    throw RangeError("interpolate: t outside the unit interval");
  }
  const long n = static_cast<long>(path.increments.size());
  const double scaled = offset * static_cast<double>(n);  // exact: n is a power of two
  long k = static_cast<long>(std::floor(scaled));
  if (k >= n) return path.states[n];
  const double frac = scaled - static_cast<double>(k);
  if (frac == 0.0) return path.states[k];
  const double left = path.states[k];
  return left + (path.states[k + 1] - left) * frac;
}

}  // namespace mppf
