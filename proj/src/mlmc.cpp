#include "mppf/mlmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mppf/error.hpp"
#include "mppf/parallel.hpp"
#include "numeric.hpp"

namespace mppf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Running sums of exp(lw) * phi and exp(lw) over pooled clouds, kept
/// relative to the largest log-weight seen so far.
class PooledRatio {
 public:
  void add(const WeightedCloud& cloud, const TestFunction& phi) {
    double m = kNegInf;
    for (double v : cloud.log_weights) m = std::max(m, v);
    if (m == kNegInf) return;
    double s = 0.0, w = 0.0;
    for (std::size_t i = 0; i < cloud.log_weights.size(); ++i) {
      const double e = std::exp(cloud.log_weights[i] - m);
      if (e == 0.0) continue;
      s += e * phi(cloud.endpoints[i]);
      w += e;
    }
    if (m > shift_) {
      const double r = shift_ == kNegInf ? 0.0 : std::exp(shift_ - m);
      num_ *= r;
      den_ *= r;
      shift_ = m;
    } else {
      const double r = std::exp(m - shift_);
      s *= r;
      w *= r;
    }
    num_ += s;
    den_ += w;
  }

  double value(long time) const {
    if (!(den_ > 0.0)) throw DegenerateWeightsError(time, "pooled weights are all zero");
    return num_ / den_;
  }

 private:
  double shift_ = kNegInf;
  double num_ = 0.0;
  double den_ = 0.0;
};

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

std::vector<double> normalized(std::vector<double> w) {
  const double total = detail::compensated_sum(w);
  for (double& v : w) v /= total;
  return w;
}

int sample_index(const std::vector<double>& pmf, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    acc += pmf[i];
    if (u < acc) return static_cast<int>(i);
  }
  // u beyond the rounded total: last index with positive mass
  for (std::size_t i = pmf.size(); i-- > 0;) {
    if (pmf[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

int draw_p(const Randomization& rand, SeedKey key, std::optional<int> forced_p) {
  if (forced_p) {
    if (*forced_p < 0 || *forced_p > rand.P_trunc) throw ConfigError("forced p out of range");
    return *forced_p;
  }
  RandomStream rs(key, Purpose::Randomization, 0, 1, 0);
  return rand.sample_particle_index(rs.uniform());
}

FilterConfig batch_config(int level, long n, long T, Quadrature q, SeedKey key, int batch) {
  FilterConfig cfg;
  cfg.level = level;
  cfg.N = n;
  cfg.T = T;
  cfg.quadrature = q;
  cfg.key = key.child(static_cast<std::uint64_t>(batch) + 1);
  return cfg;
}

}  // namespace

MlAllocation mlpf_allocate(double epsilon, int l0, double constant_C) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  if (l0 < 0) throw ConfigError("l0 must be >= 0");
  if (!(constant_C > 0.0)) throw ConfigError("allocation constant must be > 0");
  MlAllocation a;
  a.l0 = l0;
  a.epsilon = epsilon;
  a.constant_C = constant_C;
  a.L = l0;
  while (step_size(a.L) > epsilon) ++a.L;
  const double log2_scale = std::log2(constant_C) - 2.5 * std::log2(epsilon);
  for (int l = l0; l <= a.L; ++l) {
    const double v = std::exp2(log2_scale - 0.75 * static_cast<double>(l));
    a.N_levels.push_back(std::max(1L, static_cast<long>(std::ceil(v * (1.0 - 1e-12)))));
  }
  return a;
}

std::uint64_t mlpf_cost(const MlAllocation& alloc, long T) {
  std::uint64_t cost = pf_cost(alloc.l0, alloc.N(alloc.l0), T);
  for (int l = alloc.l0 + 1; l <= alloc.L; ++l) cost += cpf_cost(l, alloc.N(l), T);
  return cost;
}

MlpfResult run_mlpf(const ModelSpec& spec, const MarkedDataset& ds, long T,
                    const MlAllocation& alloc, const std::vector<TestFunction>& phis,
                    SeedKey key, const MlpfOptions& opts) {
  if (alloc.L < alloc.l0 ||
      alloc.N_levels.size() != static_cast<std::size_t>(alloc.L - alloc.l0 + 1)) {
    throw ConfigError("invalid multilevel allocation");
  }
  const std::size_t levels = alloc.N_levels.size();
  MlpfResult res;
  res.level_terms.resize(levels);
  std::vector<std::uint64_t> costs(levels);
  parallel_for(levels, [&](std::size_t j) {
    const int l = alloc.l0 + static_cast<int>(j);
    FilterConfig cfg;
    cfg.level = l;
    cfg.N = alloc.N(l);
    cfg.T = T;
    cfg.quadrature = opts.quadrature;
    cfg.key = opts.shared_key ? key : key.child(static_cast<std::uint64_t>(l));
    cfg.test_functions = phis;
    FilterOutput out = j == 0 ? run_pf(spec, ds, cfg) : run_cpf(spec, ds, cfg);
    res.level_terms[j] = std::move(out.estimates);
    costs[j] = out.cost_steps;
  });
  res.estimates = res.level_terms[0];
  for (std::size_t j = 1; j < levels; ++j) {
    for (long t = 0; t < T; ++t) {
      for (std::size_t f = 0; f < phis.size(); ++f) {
        res.estimates[t][f] += res.level_terms[j][t][f];
      }
    }
  }
  for (auto c : costs) res.cost_steps += c;
  return res;
}

int Randomization::sample_level(double u) const { return l0 + sample_index(level_pmf, u); }

int Randomization::sample_particle_index(double u) const {
  return sample_index(particle_pmf, u);
}

void Randomization::validate() const {
  if (l0 < 0 || L_trunc < l0 || P_trunc < 0 || N0 < 1) {
    throw ConfigError("randomization needs 0 <= l0 <= L_trunc, P_trunc >= 0, N0 >= 1");
  }
  if (level_pmf.size() != static_cast<std::size_t>(L_trunc - l0 + 1) ||
      particle_pmf.size() != static_cast<std::size_t>(P_trunc + 1)) {
    throw ConfigError("randomization pmf sizes do not match the truncations");
  }
  for (const auto* pmf : {&level_pmf, &particle_pmf}) {
    for (double v : *pmf) {
      if (!(v >= 0.0)) throw ConfigError("pmf entries must be nonnegative");
    }
    if (std::abs(detail::compensated_sum(*pmf) - 1.0) > 1e-12) {
      throw ConfigError("pmf does not sum to 1");
    }
  }
}

Randomization build_randomization(int l0, int L_trunc, int P_trunc, long N0) {
  if (l0 < 0 || L_trunc < l0 || P_trunc < 0 || N0 < 1) {
    throw ConfigError("randomization needs 0 <= l0 <= L_trunc, P_trunc >= 0, N0 >= 1");
  }
  Randomization r;
  r.l0 = l0;
  r.L_trunc = L_trunc;
  r.P_trunc = P_trunc;
  r.N0 = N0;
  std::vector<double> lw, pw;
  for (int l = l0; l <= L_trunc; ++l) {
    const double g = std::log(l + 2.0);
    lw.push_back(g * g * (l + 1.0) * std::sqrt(step_size(l)));
  }
  for (int p = 0; p <= P_trunc; ++p) {
    const double g = std::log(p + 2.0);
    pw.push_back(g * g * (p + 1.0) / static_cast<double>(r.N(p)));
  }
  r.level_pmf = normalized(std::move(lw));
  r.particle_pmf = normalized(std::move(pw));
  return r;
}

Randomization default_randomization() { return build_randomization(0, 10, 11, 5); }
Randomization default_randomization_gbm() { return build_randomization(0, 10, 5, 100); }

XiResult compute_xi0(const ModelSpec& spec, const MarkedDataset& ds, long T,
                     const Randomization& rand, const TestFunction& phi, SeedKey key,
                     Quadrature quadrature, std::optional<int> forced_p) {
  rand.validate();
  XiResult res;
  res.level = rand.l0;
  res.p = draw_p(rand, key, forced_p);
  PooledRatio pooled;
  double previous = 0.0, current = 0.0;
  for (int q = 0; q <= res.p; ++q) {
    const long n = rand.N(q) - rand.N(q - 1);
    FilterOutput out = run_pf(spec, ds, batch_config(rand.l0, n, T, quadrature, key, q));
    res.cost_steps += out.cost_steps;
    pooled.add(out.terminal, phi);
    previous = current;
    current = pooled.value(T - 1);
  }
  if (res.p == 0) previous = 0.0;
  res.value = (current - previous) / rand.particle_prob(res.p);
  return res;
}

XiResult compute_xil(const ModelSpec& spec, const MarkedDataset& ds, long T, int level,
                     const Randomization& rand, const TestFunction& phi, SeedKey key,
                     Quadrature quadrature, std::optional<int> forced_p) {
  rand.validate();
  if (level <= rand.l0 || level > rand.L_trunc) throw ConfigError("level out of (l0, L_trunc]");
  XiResult res;
  res.level = level;
  res.p = draw_p(rand, key, forced_p);
  PooledRatio fine, coarse;
  double previous = 0.0, current = 0.0;
  for (int q = 0; q <= res.p; ++q) {
    const long n = rand.N(q) - rand.N(q - 1);
    FilterOutput out = run_cpf(spec, ds, batch_config(level, n, T, quadrature, key, q));
    res.cost_steps += out.cost_steps;
    fine.add(out.terminal, phi);
    coarse.add(out.terminal_coarse, phi);
    previous = current;
    current = fine.value(T - 1) - coarse.value(T - 1);
  }
  if (res.p == 0) previous = 0.0;
  res.value = (current - previous) / rand.particle_prob(res.p);
  return res;
}

UpfResult upf_estimate(const ModelSpec& spec, const MarkedDataset& ds, long T,
                       const Randomization& rand, const TestFunction& phi, long M, SeedKey key,
                       Quadrature quadrature) {
  if (M < 1) throw ConfigError("M must be >= 1");
  rand.validate();
  UpfResult res;
  res.replicates.resize(static_cast<std::size_t>(M));
  parallel_for(static_cast<std::size_t>(M), [&](std::size_t i) {
    const SeedKey rep = key.child(i);
    RandomStream rs(rep, Purpose::Randomization, 0, 0, 0);
    const int level = rand.sample_level(rs.uniform());
    const XiResult xi = level == rand.l0
                            ? compute_xi0(spec, ds, T, rand, phi, rep, quadrature)
                            : compute_xil(spec, ds, T, level, rand, phi, rep, quadrature);
    UpfReplicate& r = res.replicates[i];
    r.index = static_cast<long>(i);
    r.level = level;
    r.p = xi.p;
    r.xi = xi.value;
    r.weighted_value = xi.value / rand.level_prob(level);
    r.cost_steps = xi.cost_steps;
  });
  std::vector<double> values;
  values.reserve(res.replicates.size());
  for (const auto& r : res.replicates) {
    values.push_back(r.weighted_value);
    res.total_cost += r.cost_steps;
  }
  res.mean = canonical_mean(values);
  res.std_error = M > 1 ? std::sqrt(sample_variance(values) / static_cast<double>(M)) : 0.0;
  return res;
}

double canonical_mean(std::vector<double> values) {
  if (values.empty()) throw ConfigError("mean of an empty sample");
  std::sort(values.begin(), values.end());
  return pairwise_sum(values.data(), values.size()) / static_cast<double>(values.size());
}

double sample_variance(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double m = canonical_mean(values);
  std::vector<double> sq;
  sq.reserve(values.size());
  for (double v : values) sq.push_back((v - m) * (v - m));
  std::sort(sq.begin(), sq.end());
  return pairwise_sum(sq.data(), sq.size()) / static_cast<double>(values.size() - 1);
}

}  // namespace mppf
