#include "mppf/bench.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mppf/error.hpp"
#include "mppf/parallel.hpp"

namespace mppf {

namespace {

/// Smallest level >= l0 whose step is at most epsilon.
int level_for(double epsilon, int l0) {
  int L = l0;
  while (step_size(L) > epsilon) ++L;
  return L;
}

double squared_error_mean(const std::vector<double>& estimates, double reference) {
  std::vector<double> sq;
  sq.reserve(estimates.size());
  for (double e : estimates) sq.push_back((e - reference) * (e - reference));
  return canonical_mean(std::move(sq));
}

}  // namespace

RateFit fit_rate(std::vector<std::pair<double, double>> points) {
  if (points.size() < 3) throw ConfigError("rate fit needs at least 3 points");
  RateFit fit;
  const auto n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    if (!std::isfinite(x) || !std::isfinite(y)) throw ConfigError("rate fit: non-finite point");
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (!(sxx > 0.0)) throw ConfigError("rate fit: abscissae must not all coincide");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (const auto& [x, y] : points) {
    const double r = y - (fit.intercept + fit.slope * x);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  fit.points = std::move(points);
  return fit;
}

ReferenceConfig default_reference_config(const MarkedDataset& ds) {
  ReferenceConfig cfg;
  cfg.level = std::max(0, ds.meta.data_level - 1);
  return cfg;
}

ReferenceValue reference_value(const ModelSpec& spec, const MarkedDataset& ds, long T,
                               const TestFunction& phi, const ReferenceConfig& cfg) {
  if (cfg.R < 1) throw ConfigError("reference needs R >= 1");
  ReferenceValue ref;
  ref.values.resize(static_cast<std::size_t>(cfg.R));
  std::vector<std::uint64_t> costs(ref.values.size());
  parallel_for(ref.values.size(), [&](std::size_t r) {
    FilterConfig fc;
    fc.level = cfg.level;
    fc.N = cfg.N;
    fc.T = T;
    fc.quadrature = cfg.quadrature;
    fc.key = cfg.key.child(r);
    fc.test_functions = {phi};
    const FilterOutput out = run_pf(spec, ds, fc);
    ref.values[r] = out.estimates.back()[0];
    costs[r] = out.cost_steps;
  });
  for (auto c : costs) ref.cost_steps += c;
  ref.mean = canonical_mean(ref.values);
  ref.std_error =
      cfg.R > 1 ? std::sqrt(sample_variance(ref.values) / static_cast<double>(cfg.R)) : 0.0;
  if (cfg.tolerance && ref.std_error > *cfg.tolerance / 3.0) {
    throw UnderResolvedError("reference standard error " + std::to_string(ref.std_error) +
                             " exceeds tolerance/3 = " + std::to_string(*cfg.tolerance / 3.0));
  }
  return ref;
}

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::PF: return "pf";
    case Estimator::MLPF: return "mlpf";
    case Estimator::UPF: return "upf";
  }
  return "?";
}

Estimator parse_estimator(std::string_view name) {
  for (Estimator e : {Estimator::PF, Estimator::MLPF, Estimator::UPF}) {
    if (name == to_string(e)) return e;
  }
  throw ConfigError("unknown estimator '" + std::string(name) + "'");
}

std::vector<MseRow> mse_cost_experiment(const ModelSpec& spec, const MarkedDataset& ds,
                                        double reference, const MseConfig& cfg) {
  if (cfg.reps < 1) throw ConfigError("mse experiment needs reps >= 1");
  if (cfg.targets.empty()) throw ConfigError("mse experiment needs at least one target");
  std::vector<MseRow> rows;
  for (std::size_t g = 0; g < cfg.targets.size(); ++g) {
    const double target = cfg.targets[g];
    const SeedKey grid_key = cfg.key.child(g);
    std::vector<double> est(static_cast<std::size_t>(cfg.reps));
    std::vector<std::uint64_t> cost(est.size());
    switch (cfg.estimator) {
      case Estimator::PF: {
        if (!(target > 0.0 && target < 1.0)) throw ConfigError("pf target must lie in (0, 1)");
        const int L = level_for(target, cfg.l0);
        const long N = std::max(1L, static_cast<long>(std::ceil(cfg.pf_constant / (target * target))));
        parallel_for(est.size(), [&](std::size_t r) {
          FilterConfig fc;
          fc.level = L;
          fc.N = N;
          fc.T = cfg.T;
          fc.quadrature = cfg.quadrature;
          fc.key = grid_key.child(r);
          fc.test_functions = {cfg.phi};
          const FilterOutput out = run_pf(spec, ds, fc);
          est[r] = out.estimates.back()[0];
          cost[r] = out.cost_steps;
        });
        break;
      }
      case Estimator::MLPF: {
        const MlAllocation alloc = mlpf_allocate(target, cfg.l0, cfg.ml_constant);
        MlpfOptions opts;
        opts.quadrature = cfg.quadrature;
        parallel_for(est.size(), [&](std::size_t r) {
          const MlpfResult out = run_mlpf(spec, ds, cfg.T, alloc, {cfg.phi}, grid_key.child(r), opts);
          est[r] = out.estimates.back()[0];
          cost[r] = out.cost_steps;
        });
        break;
      }
      case Estimator::UPF: {
        const long M = static_cast<long>(target);
        if (M < 1 || static_cast<double>(M) != target) {
          throw ConfigError("upf targets are replicate counts M >= 1");
        }
        for (std::size_t r = 0; r < est.size(); ++r) {
          const UpfResult out = upf_estimate(spec, ds, cfg.T, cfg.randomization, cfg.phi, M,
                                             grid_key.child(r), cfg.quadrature);
          est[r] = out.mean;
          cost[r] = out.total_cost;
        }
        break;
      }
    }
    MseRow row;
    row.target = target;
    row.reps = cfg.reps;
    row.mse = squared_error_mean(est, reference);
    row.mean_estimate = canonical_mean(est);
    std::uint64_t total = 0;
    for (auto c : cost) total += c;
    row.mean_cost = static_cast<double>(total) / static_cast<double>(cfg.reps);
    rows.push_back(row);
  }
  return rows;
}

std::string_view to_string(DecayKind k) {
  switch (k) {
    case DecayKind::CouplingVariance: return "coupling_variance";
    case DecayKind::WeakBias: return "weak_bias";
  }
  return "?";
}

DecayKind parse_decay_kind(std::string_view name) {
  for (DecayKind k : {DecayKind::CouplingVariance, DecayKind::WeakBias}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown decay kind '" + std::string(name) + "'");
}

DecayResult decay_experiment(const ModelSpec& spec, const MarkedDataset& ds,
                             const DecayConfig& cfg) {
  if (cfg.levels.size() < 4) throw ConfigError("decay experiment needs at least 4 levels");
  if (cfg.R < 2) throw ConfigError("decay experiment needs R >= 2");
  if (cfg.kind == DecayKind::WeakBias && !cfg.reference) {
    throw ConfigError("weak_bias needs a reference value");
  }
  DecayResult res;
  for (int level : cfg.levels) {
    const SeedKey level_key = cfg.key.child(static_cast<std::uint64_t>(level));
    std::vector<double> est(static_cast<std::size_t>(cfg.R));
    std::vector<std::uint64_t> cost(est.size());
    parallel_for(est.size(), [&](std::size_t r) {
      FilterConfig fc;
      fc.level = level;
      fc.N = cfg.N;
      fc.T = cfg.T;
      fc.quadrature = cfg.quadrature;
      fc.key = level_key.child(r);
      fc.test_functions = {cfg.phi};
      const FilterOutput out = cfg.kind == DecayKind::CouplingVariance ? run_cpf(spec, ds, fc)
                                                                       : run_pf(spec, ds, fc);
      est[r] = out.estimates.back()[0];
      cost[r] = out.cost_steps;
    });
    DecayRow row;
    row.level = level;
    row.mean_estimate = canonical_mean(est);
    for (auto c : cost) row.cost_steps += c;
    const double var = sample_variance(est);
    const auto R = static_cast<double>(cfg.R);
    if (cfg.kind == DecayKind::CouplingVariance) {
      row.value = var;
      row.mc_error = var * std::sqrt(2.0 / (R - 1.0));
    } else {
      row.value = std::abs(row.mean_estimate - cfg.reference->mean);
      row.mc_error = std::sqrt(var / R + cfg.reference->std_error * cfg.reference->std_error);
      row.flagged = !(row.mc_error < row.value / 3.0);
    }
    res.rows.push_back(row);
  }
  std::vector<std::pair<double, double>> pts;
  for (const DecayRow& row : res.rows) {
    if (!row.flagged && row.value > 0.0) pts.emplace_back(row.level, std::log2(row.value));
  }
  if (pts.size() >= 3) res.fit = fit_rate(std::move(pts));
  return res;
}

}  // namespace mppf
