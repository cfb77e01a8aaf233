#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "mppf/dataset.hpp"
#include "mppf/error.hpp"
#include "support.hpp"

using namespace mppf;

TEST_CASE("zero intensity gives no events") {
  ModelSpec s = default_model(ModelId::OU);
  s.theta.theta_lambda = 0.0;
  const GeneratedData g = generate_dataset(s, 50, 6, 3);
  CHECK(g.dataset.events.empty());
  CHECK(g.truth.size() == 50);
  CHECK(g.dataset.horizon_T == 50);
}

TEST_CASE("homogeneous Poisson checks") {
  const ModelSpec s = testing::test_const(1.0);
  const int seeds = 300;
  std::vector<double> counts, times, gaps;
  for (int seed = 0; seed < seeds; ++seed) {
    const GeneratedData g = generate_dataset(s, 100, 3, static_cast<std::uint64_t>(seed));
    counts.push_back(static_cast<double>(g.dataset.events.size()));
    double prev = 0.0;
    for (const MarkedEvent& e : g.dataset.events) {
      times.push_back(e.time / 100.0);
      gaps.push_back(e.time - prev);
      prev = e.time;
    }
  }
  const double se = std::sqrt(testing::var_of(counts) / seeds);
  CHECK(std::abs(testing::mean_of(counts) - 100.0) < 3.0 * se);
  const double p_uniform = testing::ks_pvalue(times, [](double u) { return u; });
  const double p_exp = testing::ks_pvalue(gaps, [](double d) { return 1.0 - std::exp(-d); });
  MESSAGE("KS uniform p=" << p_uniform << " exponential p=" << p_exp);
  CHECK(p_uniform > 0.001);
  CHECK(p_exp > 0.001);
}

TEST_CASE("OU event count follows the integrated intensity") {
  const ModelSpec s = default_model(ModelId::OU);
  double events = 0.0, integral = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const GeneratedData g = generate_dataset(s, 50, 7, seed);
    events += static_cast<double>(g.dataset.events.size());
    for (const UnitPath& p : g.truth) {
      const double dt = step_size(p.level);
      for (std::size_t k = 0; k + 1 < p.states.size(); ++k) {
        // |x| along a sub-step, trapezoid
        integral += 0.5 * dt * (intensity(s, p.states[k]) + intensity(s, p.states[k + 1]));
      }
    }
  }
  // Poisson given the path: sd = sqrt(integral)
  CHECK(std::abs(events - integral) < 4.0 * std::sqrt(integral));
}

TEST_CASE("marks sit on the truth for tiny mark variance") {
  ModelSpec s = default_model(ModelId::OU);
  s.theta.theta_Sigma = 1e-8;
  const GeneratedData g = generate_dataset(s, 20, 8, 4);
  REQUIRE(!g.dataset.events.empty());
  for (const MarkedEvent& e : g.dataset.events) {
    const auto p = static_cast<std::size_t>(std::ceil(e.time) - 1);
    CHECK(std::abs(e.mark - interpolate(g.truth[p], e.time)) < 1e-3);
  }
}

TEST_CASE("generation is deterministic under seed") {
  const ModelSpec s = default_model(ModelId::OU);
  const GeneratedData a = generate_dataset(s, 30, 7, 9);
  const GeneratedData b = generate_dataset(s, 30, 7, 9);
  const GeneratedData c = generate_dataset(s, 30, 7, 10);
  REQUIRE(a.dataset.events.size() == b.dataset.events.size());
  for (std::size_t i = 0; i < a.dataset.events.size(); ++i) {
    CHECK(a.dataset.events[i].time == b.dataset.events[i].time);
    CHECK(a.dataset.events[i].mark == b.dataset.events[i].mark);
  }
  CHECK(a.truth.back().states == b.truth.back().states);
  CHECK(a.truth.back().states != c.truth.back().states);
}

TEST_CASE("dataset round trip") {
  const GeneratedData g = generate_dataset(default_model(ModelId::OU), 40, 7, 12);
  std::stringstream buf;
  write_dataset(g.dataset, buf);
  const MarkedDataset back = read_dataset(buf);
  CHECK(back.horizon_T == 40);
  CHECK(back.meta.model.model_id == ModelId::OU);
  CHECK(back.meta.model.theta.theta_lambda == g.dataset.meta.model.theta.theta_lambda);
  CHECK(back.meta.seed == 12);
  CHECK(back.meta.data_level == 7);
  REQUIRE(back.events.size() == g.dataset.events.size());
  for (std::size_t i = 0; i < back.events.size(); ++i) {
    CHECK(back.events[i].time == g.dataset.events[i].time);
    CHECK(back.events[i].mark == g.dataset.events[i].mark);
  }
  for (double v : {0.1, 1.0 / 3.0, -2.718281828459045, 1e-300, 123456789.125}) {
    CHECK(std::stod(format_real(v)) == v);
  }
}

TEST_CASE("empty dataset has a header only") {
  MarkedDataset ds;
  ds.horizon_T = 10;
  ds.meta.model = default_model(ModelId::OU);
  std::stringstream buf;
  write_dataset(ds, buf);
  std::string line;
  std::stringstream copy(buf.str());
  while (std::getline(copy, line)) CHECK(line.front() == '#');
  const MarkedDataset back = read_dataset(buf);
  CHECK(back.events.empty());
  CHECK(back.horizon_T == 10);
}

TEST_CASE("malformed and invalid files") {
  {
    std::stringstream in("# T=10\n1.5,0.2\n1.2,0.1\n");
    CHECK_THROWS_AS(read_dataset(in), ValidationError);
  }
  {
    std::stringstream in("# T=10\n1.5,0.2\n1.7,0.3\n11.0,0.0\n");
    CHECK_THROWS_AS(read_dataset(in), ValidationError);
  }
  {
    std::stringstream in("# T=10\n1.5,0.2\nabc\n");
    try {
      read_dataset(in);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  {
    std::stringstream in("1.5,0.2\n");
    CHECK_THROWS_AS(read_dataset(in), ParseError);
  }
}

TEST_CASE("counts upto t") {
  const MarkedDataset ds = testing::make_dataset(default_model(ModelId::OU), 5,
                                                 {{0.5, 0.0}, {1.0, 0.0}, {2.5, 0.0}});
  CHECK(ds.count_upto(0.0) == 0);
  CHECK(ds.count_upto(1.0) == 2);
  CHECK(ds.count_upto(2.0) == 2);
  CHECK(ds.count_upto(5.0) == 3);
}
