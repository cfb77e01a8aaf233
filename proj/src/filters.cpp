#include "mppf/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mppf/error.hpp"
#include "numeric.hpp"

namespace mppf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Inverse-CDF sampler over nonnegative masses.
class Categorical {
 public:
  explicit Categorical(std::span<const double> masses) : cdf_(masses.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < masses.size(); ++i) {
      acc += masses[i];
      cdf_[i] = acc;
    }
  }
  double total() const { return cdf_.empty() ? 0.0 : cdf_.back(); }
  long sample(double u) const {
    const double v = u * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), v);
    if (it == cdf_.end()) {
      // v rounded onto the total: take the last index with positive mass.
      it = std::lower_bound(cdf_.begin(), cdf_.end(), cdf_.back());
    }
    return static_cast<long>(it - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

void check_normalized(std::span<const double> w, const char* name) {
  for (double v : w) {
    if (!(v >= 0.0)) throw ConfigError(std::string(name) + " has a negative or NaN weight");
  }
  const double s = detail::compensated_sum(w);
  if (std::abs(s - 1.0) > 1e-12) {
    throw ConfigError(std::string(name) + " weights are not normalized");
  }
}

void check_config(const MarkedDataset& ds, const FilterConfig& cfg, int min_level) {
  if (cfg.N < 1) throw ConfigError("number of particles must be >= 1");
  if (cfg.T < 1) throw ConfigError("T must be >= 1");
  if (cfg.T > ds.horizon_T) throw ConfigError("T exceeds the dataset horizon");
  if (cfg.level < min_level || cfg.level > 30) {
    throw ConfigError("level " + std::to_string(cfg.level) + " not allowed here");
  }
}

/// Advances one particle over (p, p+1] at the schedule's level and returns log G_p.
double propagate_unit(const ModelKernel& model, const ObservationSchedule& sched,
                      Quadrature quad, long p, double& x, RandomStream& rng) {
  const int level = sched.level();
  const long n = steps_per_unit(level);
  const double dt = step_size(level);
  const double sqrt_dt = std::sqrt(dt);
  const long base = p * n;
  double log_events = 0.0;
  double lambda_sum = 0.0;
  double xl = x;
  for (long k = 0; k < n; ++k) {
    const double z = sqrt_dt * rng.normal();
    const double xr = xl + model.drift(xl) * dt + model.diffusion(xl) * z;
    for (const ScheduledEvent& e : sched.substep(base + k)) {
      log_events += model.log_event_weight(interpolate_segment(xl, xr, e.frac), e.mark);
    }
    lambda_sum += model.intensity(quad == Quadrature::Right ? xr : xl);
    xl = xr;
  }
  if (!std::isfinite(xl)) {
    throw OverflowError(static_cast<std::size_t>(base + n), "particle filter: non-finite state");
  }
  x = xl;
  return log_events - dt * lambda_sum;
}

struct PairWeights {
  double fine;
  double coarse;
};

/// Synchronously coupled advance of a fine/coarse pair over (p, p+1].
PairWeights propagate_coupled_unit(const ModelKernel& model, const ObservationSchedule& fine,
                                   const ObservationSchedule& coarse, Quadrature quad, long p,
                                   double& xf, double& xc, RandomStream& rng) {
  const int level = fine.level();
  const long nc = steps_per_unit(level - 1);
  const double dtf = step_size(level);
  const double dtc = step_size(level - 1);
  const double sqrt_dtf = std::sqrt(dtf);
  const long base_f = p * 2 * nc;
  const long base_c = p * nc;
  double ev_f = 0.0, ev_c = 0.0, lam_f = 0.0, lam_c = 0.0;
  double f = xf, c = xc;
  for (long k = 0; k < nc; ++k) {
    double zsum = 0.0;
    for (int half = 0; half < 2; ++half) {
      const double z = sqrt_dtf * rng.normal();
      const double fr = f + model.drift(f) * dtf + model.diffusion(f) * z;
      for (const ScheduledEvent& e : fine.substep(base_f + 2 * k + half)) {
        ev_f += model.log_event_weight(interpolate_segment(f, fr, e.frac), e.mark);
      }
      lam_f += model.intensity(quad == Quadrature::Right ? fr : f);
      f = fr;
      zsum = half == 0 ? z : zsum + z;
    }
    const double cr = c + model.drift(c) * dtc + model.diffusion(c) * zsum;
    for (const ScheduledEvent& e : coarse.substep(base_c + k)) {
      ev_c += model.log_event_weight(interpolate_segment(c, cr, e.frac), e.mark);
    }
    lam_c += model.intensity(quad == Quadrature::Right ? cr : c);
    c = cr;
  }
  if (!std::isfinite(f) || !std::isfinite(c)) {
    throw OverflowError(static_cast<std::size_t>(base_f + 2 * nc),
                        "coupled particle filter: non-finite state");
  }
  xf = f;
  xc = c;
  return {ev_f - dtf * lam_f, ev_c - dtc * lam_c};
}

/// Normalizes, records estimates, returns the log of the mean weight.
double record_time(long p, std::span<const double> log_w, std::span<const double> x,
                   const std::vector<TestFunction>& phis, std::vector<double>& probs,
                   std::vector<double>& row) {
  const double log_sum = normalize_log_weights(log_w, probs);
  if (!std::isfinite(log_sum)) {
    throw DegenerateWeightsError(p, "all particle weights are zero");
  }
  row.assign(phis.size(), 0.0);
  for (std::size_t f = 0; f < phis.size(); ++f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (probs[i] != 0.0) acc += probs[i] * phis[f](x[i]);
    }
    row[f] = acc;
  }
  return log_sum - std::log(static_cast<double>(x.size()));
}

}  // namespace

std::vector<long> multinomial_resample(std::span<const double> weights, long n_draws,
                                       RandomStream& rng) {
  for (double v : weights) {
    if (!(v >= 0.0)) throw ConfigError("resampling weights must be nonnegative");
  }
  const Categorical cat(weights);
  if (weights.empty() || !(cat.total() > 0.0)) {
    throw DegenerateWeightsError(-1, "resampling weights sum to zero");
  }
  std::vector<long> out(n_draws);
  for (long i = 0; i < n_draws; ++i) out[i] = cat.sample(rng.uniform());
  return out;
}

std::vector<long> ordered_multinomial_resample(std::span<const double> states,
                                               std::span<const double> weights, long n_draws,
                                               RandomStream& rng) {
  if (states.size() != weights.size()) throw ConfigError("resampling: size mismatch");
  std::vector<long> order(states.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<long>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](long a, long b) { return states[a] < states[b]; });
  std::vector<double> w(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) w[i] = weights[order[i]];
  auto idx = multinomial_resample(w, n_draws, rng);
  for (long& v : idx) v = order[v];
  return idx;
}

CoupledIndices maximal_coupling_resample(std::span<const double> w_fine,
                                         std::span<const double> w_coarse, long n_draws,
                                         RandomStream& rng) {
  if (w_fine.size() != w_coarse.size() || w_fine.empty()) {
    throw ConfigError("coupled resampling needs two weight arrays of equal size");
  }
  check_normalized(w_fine, "fine");
  check_normalized(w_coarse, "coarse");
  const std::size_t n = w_fine.size();
  std::vector<double> common(n), res_f(n), res_c(n);
  for (std::size_t i = 0; i < n; ++i) {
    common[i] = std::min(w_fine[i], w_coarse[i]);
    res_f[i] = w_fine[i] - common[i];
    res_c[i] = w_coarse[i] - common[i];
  }
  const double meet_mass = detail::compensated_sum(common);
  const Categorical cat_common(common), cat_f(res_f), cat_c(res_c);
  const bool residual_ok = cat_f.total() > 0.0 && cat_c.total() > 0.0;

  CoupledIndices out;
  out.fine.resize(n_draws);
  out.coarse.resize(n_draws);
  out.met.resize(n_draws);
  for (long i = 0; i < n_draws; ++i) {
    const double r = rng.uniform();
    if ((r < meet_mass && meet_mass > 0.0) || !residual_ok) {
      const long a = cat_common.sample(rng.uniform());
      out.fine[i] = a;
      out.coarse[i] = a;
      out.met[i] = true;
    } else {
      out.fine[i] = cat_f.sample(rng.uniform());
      out.coarse[i] = cat_c.sample(rng.uniform());
      out.met[i] = false;
    }
  }
  return out;
}

double normalize_log_weights(std::span<const double> log_weights, std::vector<double>& out) {
  out.resize(log_weights.size());
  double max_lw = kNegInf;
  for (double v : log_weights) {
    if (std::isnan(v)) throw NumericError("NaN log-weight");
    max_lw = std::max(max_lw, v);
  }
  if (max_lw == kNegInf) {
    std::fill(out.begin(), out.end(), 0.0);
    return kNegInf;
  }
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    out[i] = std::exp(log_weights[i] - max_lw);
  }
  const double total = detail::compensated_sum(out);
  for (double& v : out) v /= total;
  return max_lw + std::log(total);
}

double estimate(std::span<const double> log_weights, std::span<const double> endpoints,
                const TestFunction& phi) {
  if (log_weights.size() != endpoints.size()) throw ConfigError("estimate: size mismatch");
  std::vector<double> probs;
  if (!std::isfinite(normalize_log_weights(log_weights, probs))) {
    throw DegenerateWeightsError(-1, "estimate: zero total weight");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] != 0.0) acc += probs[i] * phi(endpoints[i]);
  }
  return acc;
}

std::uint64_t pf_cost(int level, long N, long T) {
  return static_cast<std::uint64_t>(N) * static_cast<std::uint64_t>(steps_per_unit(level)) *
         static_cast<std::uint64_t>(T);
}

std::uint64_t cpf_cost(int level, long N, long T) {
  return static_cast<std::uint64_t>(N) *
         static_cast<std::uint64_t>(steps_per_unit(level) + steps_per_unit(level - 1)) *
         static_cast<std::uint64_t>(T);
}

FilterOutput run_pf(const ModelSpec& spec, const MarkedDataset& ds, const FilterConfig& cfg) {
  check_config(ds, cfg, 0);
  const ModelKernel model(spec);
  const ObservationSchedule sched(ds, cfg.level);
  const auto N = static_cast<std::size_t>(cfg.N);
  const auto level = static_cast<std::uint32_t>(cfg.level);

  std::vector<double> x(N, spec.x_star), scratch(N), log_w(N), probs;
  FilterOutput out;
  out.estimates.resize(cfg.T);
  out.log_normalizer.resize(cfg.T);
  double log_z = 0.0;

  for (long p = 0; p < cfg.T; ++p) {
    if (p > 0) {
      RandomStream rs(cfg.key, Purpose::Resample, level, 0, static_cast<std::uint64_t>(p));
      const auto idx = ordered_multinomial_resample(x, probs, cfg.N, rs);
      for (std::size_t i = 0; i < N; ++i) scratch[i] = x[idx[i]];
      x.swap(scratch);
    }
    for (std::size_t i = 0; i < N; ++i) {
      RandomStream rng(cfg.key, Purpose::Dynamics, level, i, static_cast<std::uint64_t>(p));
      log_w[i] = propagate_unit(model, sched, cfg.quadrature, p, x[i], rng);
    }
    log_z += record_time(p, log_w, x, cfg.test_functions, probs, out.estimates[p]);
    out.log_normalizer[p] = log_z;
    out.cost_steps += pf_cost(cfg.level, cfg.N, 1);
  }
  out.terminal.log_weights = log_w;
  out.terminal.endpoints = x;
  return out;
}

FilterOutput run_cpf(const ModelSpec& spec, const MarkedDataset& ds, const FilterConfig& cfg) {
  check_config(ds, cfg, 1);
  const ModelKernel model(spec);
  const ObservationSchedule fine(ds, cfg.level), coarse(ds, cfg.level - 1);
  const auto N = static_cast<std::size_t>(cfg.N);
  const auto level = static_cast<std::uint32_t>(cfg.level);

  std::vector<double> xf(N, spec.x_star), xc(N, spec.x_star), sf(N), sc(N);
  std::vector<double> lw_f(N), lw_c(N), pf_probs, pc_probs;
  std::vector<double> row_f, row_c;
  FilterOutput out;
  out.estimates.resize(cfg.T);
  out.log_normalizer.resize(cfg.T);
  double log_z = 0.0;

  for (long p = 0; p < cfg.T; ++p) {
    if (p > 0) {
      RandomStream rs(cfg.key, Purpose::Resample, level, 0, static_cast<std::uint64_t>(p));
      const auto idx = maximal_coupling_resample(pf_probs, pc_probs, cfg.N, rs);
      long met = 0;
      for (std::size_t i = 0; i < N; ++i) {
        sf[i] = xf[idx.fine[i]];
        sc[i] = xc[idx.coarse[i]];
        met += idx.met[i] ? 1 : 0;
      }
      xf.swap(sf);
      xc.swap(sc);
      out.meet_fraction.push_back(static_cast<double>(met) / static_cast<double>(N));
    }
    for (std::size_t i = 0; i < N; ++i) {
      RandomStream rng(cfg.key, Purpose::Dynamics, level, i, static_cast<std::uint64_t>(p));
      const PairWeights w =
          propagate_coupled_unit(model, fine, coarse, cfg.quadrature, p, xf[i], xc[i], rng);
      lw_f[i] = w.fine;
      lw_c[i] = w.coarse;
    }
    log_z += record_time(p, lw_f, xf, cfg.test_functions, pf_probs, row_f);
    record_time(p, lw_c, xc, cfg.test_functions, pc_probs, row_c);
    auto& row = out.estimates[p];
    row.resize(row_f.size());
    for (std::size_t f = 0; f < row.size(); ++f) row[f] = row_f[f] - row_c[f];
    out.log_normalizer[p] = log_z;
    out.cost_steps += cpf_cost(cfg.level, cfg.N, 1);
  }
  out.terminal = {lw_f, xf};
  out.terminal_coarse = {lw_c, xc};
  return out;
}

}  // namespace mppf
