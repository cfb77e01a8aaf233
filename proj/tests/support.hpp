#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "mppf/dataset.hpp"
#include "mppf/models.hpp"

namespace mppf::testing {

/// Upper tail of the chi-square statistic of observed counts against
/// expected probabilities (cells with zero probability skipped).
inline double chi_square_pvalue(const std::vector<long>& counts, const std::vector<double>& probs) {
  double n = 0.0;
  for (long c : counts) n += static_cast<double>(c);
  double stat = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    const double e = n * probs[i];
    stat += (counts[i] - e) * (counts[i] - e) / e;
    ++cells;
  }
  boost::math::chi_squared dist(cells - 1);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

/// One-sample Kolmogorov-Smirnov p-value (asymptotic law, Stephens' small-n
/// correction).
inline double ks_pvalue(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  const double sn = std::sqrt(n);
  const double lam = (sn + 0.12 + 0.11 / sn) * d;
  if (lam < 0.2) return 1.0;
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
    q += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

/// OLS slope of y on x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

inline MarkedDataset make_dataset(const ModelSpec& spec, long T, std::vector<MarkedEvent> events) {
  MarkedDataset ds;
  ds.horizon_T = T;
  ds.events = std::move(events);
  ds.meta.model = spec;
  ds.meta.data_level = 10;
  ds.validate();
  return ds;
}

inline ModelSpec test_const(double c = 1.0, bool x_free_marks = false) {
  ModelSpec s = default_model(ModelId::TestConst);
  s.theta.fixed_params["c"] = c;
  if (x_free_marks) s.theta.fixed_params["x_independent_marks"] = 1.0;
  return s;
}

/// OU with sigma = 0: the Euler recursion is deterministic.
inline ModelSpec ou_noiseless() {
  ModelSpec s = default_model(ModelId::OU);
  s.theta.fixed_params["sigma"] = 0.0;
  return s;
}

}  // namespace mppf::testing
