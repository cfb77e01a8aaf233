#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "mppf/error.hpp"
#include "mppf/filters.hpp"
#include "support.hpp"

using namespace mppf;

namespace {

std::vector<long> tally(const std::vector<long>& idx, std::size_t cells) {
  std::vector<long> c(cells, 0);
  for (long i : idx) ++c[static_cast<std::size_t>(i)];
  return c;
}

const MarkedDataset& ou_data() {
  static const MarkedDataset ds = generate_dataset(default_model(ModelId::OU), 10, 10, 1).dataset;
  return ds;
}

FilterConfig config(int level, long N, long T, std::uint64_t seed) {
  FilterConfig cfg;
  cfg.level = level;
  cfg.N = N;
  cfg.T = T;
  cfg.key = SeedKey(seed);
  return cfg;
}

}  // namespace

TEST_CASE("multinomial resampling") {
  RandomStream rs(SeedKey(1), Purpose::Test, 0, 0, 0);
  SUBCASE("point mass") {
    const std::vector<double> w{0.0, 0.0, 2.0, 0.0};
    for (long i : multinomial_resample(w, 500, rs)) CHECK(i == 2);
  }
  SUBCASE("uniform weights") {
    const std::size_t cells = 10;
    const long draws = 400000;
    const std::vector<double> w(cells, 1.0);
    const auto counts = tally(multinomial_resample(w, draws, rs), cells);
    const double p = 1.0 / cells;
    const double sd = std::sqrt(draws * p * (1 - p));
    for (long c : counts) CHECK(std::abs(c - draws * p) < 4.0 * sd);
    CHECK(testing::chi_square_pvalue(counts, std::vector<double>(cells, p)) > 0.001);
  }
  SUBCASE("reproducible under a fixed stream") {
    const std::vector<double> w{0.5, 0.5};
    RandomStream a(SeedKey(4), Purpose::Test, 1, 2, 3), b(SeedKey(4), Purpose::Test, 1, 2, 3);
    CHECK(multinomial_resample(w, 100, a) == multinomial_resample(w, 100, b));
  }
  SUBCASE("zero weights") {
    const std::vector<double> w{0.0, 0.0};
    CHECK_THROWS_AS(multinomial_resample(w, 3, rs), DegenerateWeightsError);
  }
}

TEST_CASE("state-ordered resampling has the multinomial law") {
  RandomStream rs(SeedKey(2), Purpose::Test, 0, 0, 0);
  const std::vector<double> states{3.0, -1.0, 0.5, 7.0, 0.5};
  const std::vector<double> w{0.1, 0.3, 0.2, 0.25, 0.15};
  const auto counts = tally(ordered_multinomial_resample(states, w, 200000, rs), 5);
  CHECK(testing::chi_square_pvalue(counts, w) > 0.001);
  const std::vector<double> point{0.0, 0.0, 0.0, 1.0, 0.0};
  for (long i : ordered_multinomial_resample(states, point, 50, rs)) CHECK(i == 3);
}

TEST_CASE("maximal coupling") {
  RandomStream rs(SeedKey(3), Purpose::Test, 0, 0, 0);
  const long draws = 100000;
  SUBCASE("equal weights always meet") {
    const std::vector<double> w{0.2, 0.3, 0.5};
    const CoupledIndices c = maximal_coupling_resample(w, w, 1000, rs);
    for (long i = 0; i < 1000; ++i) {
      CHECK(c.met[i]);
      CHECK(c.fine[i] == c.coarse[i]);
    }
  }
  SUBCASE("disjoint supports never meet") {
    const std::vector<double> w1{0.4, 0.6, 0.0, 0.0}, w2{0.0, 0.0, 0.7, 0.3};
    const CoupledIndices c = maximal_coupling_resample(w1, w2, draws, rs);
    for (bool m : c.met) CHECK_FALSE(m);
    CHECK(testing::chi_square_pvalue(tally(c.fine, 4), w1) > 0.001);
    CHECK(testing::chi_square_pvalue(tally(c.coarse, 4), w2) > 0.001);
    // independence: joint counts against the product law
    std::vector<long> joint(4, 0);
    for (long i = 0; i < draws; ++i) ++joint[c.fine[i] * 2 + (c.coarse[i] - 2)];
    CHECK(testing::chi_square_pvalue(joint, {0.28, 0.12, 0.42, 0.18}) > 0.001);
  }
  SUBCASE("meeting frequency and marginals") {
    const std::vector<double> w1{0.5, 0.5}, w2{0.9, 0.1};
    const CoupledIndices c = maximal_coupling_resample(w1, w2, draws, rs);
    double met = 0;
    for (long i = 0; i < draws; ++i) {
      met += c.met[i] ? 1 : 0;
      if (c.met[i]) CHECK(c.fine[i] == c.coarse[i]);
    }
    const double rate = met / draws;
    const double sd = std::sqrt(0.6 * 0.4 / draws);
    CHECK(std::abs(rate - 0.6) < 3.0 * sd);
    CHECK(testing::chi_square_pvalue(tally(c.fine, 2), w1) > 0.001);
    CHECK(testing::chi_square_pvalue(tally(c.coarse, 2), w2) > 0.001);
  }
  SUBCASE("unnormalized input is rejected") {
    const std::vector<double> w1{0.5, 0.6}, w2{0.5, 0.5};
    CHECK_THROWS_AS(maximal_coupling_resample(w1, w2, 10, rs), ConfigError);
  }
}

TEST_CASE("estimate") {
  const std::vector<double> zero_lw(4, 0.0), xs{1.0, 2.0, 3.0, 4.0};
  CHECK(estimate(zero_lw, xs, [](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-15));
  const double ninf = -std::numeric_limits<double>::infinity();
  const std::vector<double> lw{ninf, 0.0}, vals{5.0, 7.0};
  CHECK(estimate(lw, vals, identity_function()) == 7.0);
  RandomStream rs(SeedKey(5), Purpose::Test, 0, 0, 0);
  std::vector<double> rw(50), rx(50);
  for (std::size_t i = 0; i < 50; ++i) {
    rw[i] = 3.0 * rs.normal();
    rx[i] = rs.normal();
  }
  const double a = -2.5, b = 0.75;
  const double lhs = estimate(rw, rx, [&](double x) { return a * x + b; });
  CHECK(std::abs(lhs - (a * estimate(rw, rx, identity_function()) + b)) < 1e-12);
  const std::vector<double> dead{ninf, ninf};
  CHECK_THROWS_AS(estimate(dead, vals, identity_function()), DegenerateWeightsError);
}

TEST_CASE("single particle filter reports its own trajectory") {
  const ModelSpec s = default_model(ModelId::OU);
  const FilterOutput out = run_pf(s, ou_data(), config(3, 1, 10, 7));
  for (long t = 0; t < 10; ++t) CHECK(std::isfinite(out.estimates[t][0]));
  CHECK(out.estimates.back()[0] == out.terminal.endpoints[0]);
  // replay: N = 1 never changes ancestry
  double x = s.x_star;
  for (long p = 0; p < 10; ++p) {
    RandomStream rng(SeedKey(7), Purpose::Dynamics, 3, 0, p);
    x = euler_unit(s, 3, p, x, rng).end();
    CHECK(out.estimates[p][0] == x);
  }
}

TEST_CASE("uniform weights give the plain endpoint mean") {
  const ModelSpec s = testing::test_const(1.0, true);
  const GeneratedData g = generate_dataset(s, 5, 6, 3);
  FilterConfig cfg = config(3, 400, 5, 8);
  cfg.test_functions = {identity_function(), [](double x) { return x * x; }};
  const FilterOutput out = run_pf(s, g.dataset, cfg);
  for (double lw : out.terminal.log_weights) CHECK(lw == out.terminal.log_weights[0]);
  const double m = testing::mean_of(out.terminal.endpoints);
  CHECK(out.estimates.back()[0] == doctest::Approx(m).epsilon(1e-12));
}

TEST_CASE("cost counters") {
  const ModelSpec s = default_model(ModelId::OU);
  CHECK(run_pf(s, ou_data(), config(4, 50, 6, 1)).cost_steps == 50u * 16u * 6u);
  CHECK(run_cpf(s, ou_data(), config(4, 50, 6, 1)).cost_steps == 50u * 24u * 6u);
  CHECK(pf_cost(0, 7, 3) == 21u);
  CHECK(cpf_cost(1, 7, 3) == 63u);
}

TEST_CASE("degenerate weights abort with the time index") {
  ModelSpec s = testing::ou_noiseless();
  s.x_star = 0.0;
  const MarkedDataset ds = testing::make_dataset(s, 4, {{2.5, 0.0}});
  try {
    run_pf(s, ds, config(2, 10, 4, 1));
    FAIL("expected degenerate weights");
  } catch (const DegenerateWeightsError& e) {
    CHECK(e.time() == 2);
  }
}

TEST_CASE("run is deterministic and level-specific") {
  const ModelSpec s = default_model(ModelId::OU);
  const FilterOutput a = run_pf(s, ou_data(), config(3, 200, 10, 5));
  const FilterOutput b = run_pf(s, ou_data(), config(3, 200, 10, 5));
  CHECK(a.estimates == b.estimates);
  CHECK(a.log_normalizer == b.log_normalizer);
  const FilterOutput c = run_cpf(s, ou_data(), config(3, 200, 10, 5));
  const FilterOutput d = run_cpf(s, ou_data(), config(3, 200, 10, 5));
  CHECK(c.estimates == d.estimates);
}

TEST_CASE("one-step conjugate oracle with constant intensity") {
  // clipping to a single value makes lambda constant, so the weight is
  // Gaussian in the interpolated state x_s = x* + s (X_1 - x*)
  ModelSpec s = default_model(ModelId::OU);
  s.clip = {true, 2.0, 2.0};
  const double ev = 0.6, y = 1.4;
  const MarkedDataset ds = testing::make_dataset(s, 1, {{ev, y}});
  const double m = s.x_star * (1.0 - 0.98), v = 1.0;
  // y | X_1 ~ N(x* (1 - ev) + ev X_1, Sigma)
  const double a = ev, c = s.x_star * (1.0 - ev), S = s.theta.theta_Sigma;
  const double post_var = 1.0 / (1.0 / v + a * a / S);
  const double post_mean = post_var * (m / v + a * (y - c) / S);
  FilterConfig cfg = config(0, 200000, 1, 31);
  const FilterOutput out = run_pf(s, ds, cfg);
  std::vector<double> probs;
  normalize_log_weights(out.terminal.log_weights, probs);
  const double est = out.estimates[0][0];
  double var = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    var += probs[i] * probs[i] * (out.terminal.endpoints[i] - est) * (out.terminal.endpoints[i] - est);
  }
  MESSAGE("estimate " << est << " oracle " << post_mean << " se " << std::sqrt(var));
  CHECK(std::abs(est - post_mean) < 3.0 * std::sqrt(var));
}

TEST_CASE("noiseless coupled filter gives the deterministic gap") {
  const ModelSpec s = testing::ou_noiseless();
  const MarkedDataset ds = testing::make_dataset(s, 3, {{0.5, 0.6}, {1.7, 0.2}});
  std::vector<double> first;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const FilterOutput out = run_cpf(s, ds, config(3, 20, 3, seed));
    std::vector<double> col;
    for (const auto& row : out.estimates) col.push_back(row[0]);
    if (first.empty()) first = col;
    CHECK(col == first);
  }
  for (long t = 1; t <= 3; ++t) {
    const double fine = std::pow(1.0 - 0.98 / 8, 8 * t), coarse = std::pow(1.0 - 0.98 / 4, 4 * t);
    CHECK(first[t - 1] == doctest::Approx(fine - coarse).epsilon(1e-12));
  }
}

TEST_CASE("coupled difference matches independent high-N filters" * doctest::timeout(600)) {
  const ModelSpec s = default_model(ModelId::OU);
  const int R = 200;
  std::vector<double> diffs(R);
  for (int r = 0; r < R; ++r) {
    diffs[r] = run_cpf(s, ou_data(), config(4, 1000, 10, 1000 + r)).estimates.back()[0];
  }
  const double fine = run_pf(s, ou_data(), config(4, 1000000, 10, 17)).estimates.back()[0];
  const double coarse = run_pf(s, ou_data(), config(3, 1000000, 10, 18)).estimates.back()[0];
  // single-run spread at N = 1e6 from 10 runs at N = 1e4, scaled by 1/100
  std::vector<double> f_runs, c_runs;
  for (int r = 0; r < 10; ++r) {
    f_runs.push_back(run_pf(s, ou_data(), config(4, 10000, 10, 300 + r)).estimates.back()[0]);
    c_runs.push_back(run_pf(s, ou_data(), config(3, 10000, 10, 400 + r)).estimates.back()[0]);
  }
  const double ref_var = (testing::var_of(f_runs) + testing::var_of(c_runs)) / 100.0;
  const double se = std::sqrt(testing::var_of(diffs) / R + ref_var);
  MESSAGE("cpf mean " << testing::mean_of(diffs) << " reference " << fine - coarse << " se " << se);
  CHECK(std::abs(testing::mean_of(diffs) - (fine - coarse)) < 3.0 * se);
}

TEST_CASE("filter consistency across particle numbers") {
  const ModelSpec s = default_model(ModelId::OU);
  std::vector<double> small, large;
  for (int r = 0; r < 20; ++r) {
    small.push_back(run_pf(s, ou_data(), config(3, 1000, 10, 500 + r)).estimates.back()[0]);
  }
  for (int r = 0; r < 5; ++r) {
    large.push_back(run_pf(s, ou_data(), config(3, 100000, 10, 600 + r)).estimates.back()[0]);
  }
  const double se = std::sqrt(testing::var_of(small) / 20 + testing::var_of(large) / 5);
  CHECK(std::abs(testing::mean_of(small) - testing::mean_of(large)) < 5.0 * se);
}

TEST_CASE("normalizing constant is unbiased") {
  const ModelSpec s = default_model(ModelId::OU);
  const long T = 5;
  std::vector<double> z;
  for (int r = 0; r < 2000; ++r) {
    z.push_back(std::exp(run_pf(s, ou_data(), config(2, 50, T, 2000 + r)).log_normalizer.back()));
  }
  std::vector<double> ref;
  for (int r = 0; r < 5; ++r) {
    ref.push_back(std::exp(run_pf(s, ou_data(), config(2, 100000, T, 9000 + r)).log_normalizer.back()));
  }
  const double se = std::sqrt(testing::var_of(z) / z.size() + testing::var_of(ref) / ref.size());
  MESSAGE("Z mean " << testing::mean_of(z) << " ref " << testing::mean_of(ref) << " se " << se);
  CHECK(std::abs(testing::mean_of(z) - testing::mean_of(ref)) < 3.0 * se);
}
