#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "mppf/error.hpp"
#include "mppf/filters.hpp"
#include "mppf/potentials.hpp"
#include "support.hpp"

using namespace mppf;

namespace {

UnitPath path_of(int level, long start, std::vector<double> states) {
  UnitPath p;
  p.level = level;
  p.start_time = start;
  for (std::size_t k = 0; k + 1 < states.size(); ++k) p.increments.push_back(states[k + 1] - states[k]);
  p.states = std::move(states);
  return p;
}

}  // namespace

TEST_CASE("unit potential examples") {
  SUBCASE("no events, constant unit intensity") {
    const ModelSpec s = testing::test_const(1.0);
    const MarkedDataset ds = testing::make_dataset(s, 3, {});
    for (int l : {0, 3, 6}) {
      const PotentialContext ctx(s, ds, l);
      RandomStream rs(SeedKey(1), Purpose::Test, l, 0, 0);
      const UnitPath p = euler_unit(s, l, 1, 0.0, rs);
      CHECK(unit_potential(ctx, 1, p) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    }
  }
  SUBCASE("level 0, constant c") {
    const ModelSpec s = testing::test_const(2.5);
    const MarkedDataset ds = testing::make_dataset(s, 1, {});
    const PotentialContext ctx(s, ds, 0);
    CHECK(unit_potential(ctx, 0, path_of(0, 0, {0.0, 4.0})) ==
          doctest::Approx(std::exp(-2.5)).epsilon(1e-14));
  }
  SUBCASE("one event, hand computation") {
    const ModelSpec s = testing::test_const(1.0);
    const MarkedDataset ds = testing::make_dataset(s, 2, {{1.5, 0.5}});
    const PotentialContext ctx(s, ds, 0);
    const double want = std::exp(-1.0) / std::sqrt(2.0 * std::numbers::pi);
    CHECK(unit_potential(ctx, 1, path_of(0, 1, {0.0, 1.0})) ==
          doctest::Approx(want).epsilon(1e-14));
    // the event does not touch (0, 1]
    CHECK(unit_potential(ctx, 0, path_of(0, 0, {0.0, 1.0})) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  }
  SUBCASE("zero intensity at an event gives weight zero") {
    const ModelSpec s = default_model(ModelId::OU);
    const MarkedDataset ds = testing::make_dataset(s, 1, {{0.5, 0.0}});
    const PotentialContext ctx(s, ds, 0);
    CHECK(unit_potential(ctx, 0, path_of(0, 0, {-1.0, 1.0})) == 0.0);
  }
  SUBCASE("right and left quadrature") {
    ModelSpec s = default_model(ModelId::OU);
    s.theta.theta_lambda = 1.0;
    const MarkedDataset ds = testing::make_dataset(s, 1, {});
    const UnitPath p = path_of(1, 0, {1.0, 2.0, 4.0});
    CHECK(log_unit_potential(PotentialContext(s, ds, 1, Quadrature::Right), 0, p) ==
          doctest::Approx(-0.5 * (2.0 + 4.0)));
    CHECK(log_unit_potential(PotentialContext(s, ds, 1, Quadrature::Left), 0, p) ==
          doctest::Approx(-0.5 * (1.0 + 2.0)));
  }
}

TEST_CASE("substep factor examples") {
  SUBCASE("no events, c = 2, level 1") {
    const ModelSpec s = testing::test_const(2.0);
    const MarkedDataset ds = testing::make_dataset(s, 2, {});
    const PotentialContext ctx(s, ds, 1);
    CHECK(substep_factor(ctx, 3, 0.4, -1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  }
  SUBCASE("left-endpoint product over a unit equals the unit exponential factor") {
    ModelSpec s = default_model(ModelId::OU);
    const MarkedDataset ds = testing::make_dataset(s, 2, {});
    for (Quadrature q : {Quadrature::Left, Quadrature::Right}) {
      const PotentialContext ctx(s, ds, 4, q);
      RandomStream rs(SeedKey(2), Purpose::Test, 4, 0, 0);
      const UnitPath p = euler_unit(s, 4, 1, 1.0, rs);
      double log_prod = 0.0;
      for (long k = 0; k < 16; ++k) {
        log_prod += log_substep_factor(ctx, 16 + k, p.states[k], p.states[k + 1]);
      }
      double left_sum = 0.0;
      for (long k = 0; k < 16; ++k) {
        left_sum += intensity(s, q == Quadrature::Left ? p.states[k] : p.states[k + 1]);
      }
      CHECK(log_prod == doctest::Approx(-left_sum / 16.0).epsilon(1e-13));
      CHECK(log_prod == doctest::Approx(log_unit_potential(ctx, 1, p)).epsilon(1e-13));
    }
  }
  SUBCASE("one event, constant intensity, Gaussian mark") {
    const ModelSpec s = testing::test_const(3.0);
    // sub-step (0.25, 0.5] at level 2; event at 0.375 is its midpoint
    const MarkedDataset ds = testing::make_dataset(s, 1, {{0.375, 1.2}});
    const PotentialContext ctx(s, ds, 2, Quadrature::Left);
    const double xs = 0.5 * (0.2 + 1.0);
    const double want = std::exp(-0.5 * (1.2 - xs) * (1.2 - xs)) /
                        std::sqrt(2.0 * std::numbers::pi) * 3.0 * std::exp(-3.0 * 0.25);
    CHECK(substep_factor(ctx, 1, 0.2, 1.0) == doctest::Approx(want).epsilon(1e-14));
    CHECK(substep_factor(ctx, 0, 0.2, 1.0) == doctest::Approx(std::exp(-0.75)).epsilon(1e-14));
  }
  SUBCASE("event on a grid point closes its sub-step") {
    const ModelSpec s = testing::test_const(1.0);
    const MarkedDataset ds = testing::make_dataset(s, 1, {{0.5, 0.0}});
    const PotentialContext ctx(s, ds, 1);
    const double peak = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    // right end x = 0 sits exactly on the mark
    CHECK(substep_factor(ctx, 0, 5.0, 0.0) == doctest::Approx(peak * std::exp(-0.5)));
    CHECK(substep_factor(ctx, 1, 5.0, 0.0) == doctest::Approx(std::exp(-0.5)));
  }
}

TEST_CASE("Euler transition density") {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  CHECK(euler_transition_logdensity(testing::test_const(), 0, 0.7, 0.7) ==
        doctest::Approx(-half_log_2pi).epsilon(1e-15));
  const ModelSpec ou = default_model(ModelId::OU);
  for (int l : {0, 3, 7}) {
    const double dt = step_size(l);
    const double x = 1.3;
    CHECK(euler_transition_logdensity(ou, l, x, x - 0.98 * x * dt) ==
          doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi * dt)).epsilon(1e-14));
  }
  // normalization by composite Simpson over +-12 sd
  for (ModelId id : {ModelId::OU, ModelId::Langevin, ModelId::NLDT, ModelId::GBM}) {
    const ModelSpec s = default_model(id);
    const int l = 3;
    const double x0 = 1.7;
    const double mean = x0 + drift(s, x0) * step_size(l);
    const double sd = diffusion_coeff(s, x0) * std::sqrt(step_size(l));
    const int n = 4000;
    const double a = mean - 12 * sd, b = mean + 12 * sd, h = (b - a) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      acc += w * std::exp(euler_transition_logdensity(s, l, x0, a + i * h));
    }
    CHECK(std::abs(acc * h / 3.0 - 1.0) < 1e-6);
  }
  ModelSpec gbm = default_model(ModelId::GBM);
  CHECK_THROWS_AS(euler_transition_logdensity(gbm, 2, 0.0, 0.1), SingularityError);
}

TEST_CASE("log-domain consistency along the truth") {
  const ModelSpec s = default_model(ModelId::OU);
  const GeneratedData g = generate_dataset(s, 12, 5, 21);
  const PotentialContext ctx(s, g.dataset, 5);
  double log_sum = 0.0, prod = 1.0;
  for (long p = 0; p < 12; ++p) {
    const double lg = log_unit_potential(ctx, p, g.truth[p]);
    log_sum += lg;
    prod *= std::exp(lg);
  }
  CHECK(std::abs(std::log(prod) - log_sum) <= 1e-12 * std::max(1.0, std::abs(log_sum)));
}

TEST_CASE("re-expressed path gives the identical potential") {
  const ModelSpec s = default_model(ModelId::OU);
  const GeneratedData g = generate_dataset(s, 4, 6, 22);
  const PotentialContext ctx(s, g.dataset, 6);
  for (long p = 0; p < 4; ++p) {
    const UnitPath& truth = g.truth[p];
    const UnitPath again = euler_from_increments(s, 6, p, truth.start(), truth.increments);
    CHECK(log_unit_potential(ctx, p, again) == log_unit_potential(ctx, p, truth));
  }
}

TEST_CASE("x-independent marks make the potential path-free") {
  const ModelSpec s = testing::test_const(1.5, true);
  const MarkedDataset ds = testing::make_dataset(s, 3, {{0.3, 0.1}, {1.2, -0.4}, {1.9, 2.0}});
  const PotentialContext ctx(s, ds, 3);
  for (long p = 0; p < 3; ++p) {
    RandomStream a(SeedKey(1), Purpose::Test, 3, 0, p), b(SeedKey(2), Purpose::Test, 3, 0, p);
    const double ga = log_unit_potential(ctx, p, euler_unit(s, 3, p, 0.0, a));
    const double gb = log_unit_potential(ctx, p, euler_unit(s, 3, p, 5.0, b));
    CHECK(ga == gb);
  }
}

TEST_CASE("filter kernels agree bit-exactly with the reference potential") {
  const ModelSpec s = default_model(ModelId::OU);
  const GeneratedData g = generate_dataset(s, 3, 9, 5);
  REQUIRE(!g.dataset.events.empty());
  for (Quadrature q : {Quadrature::Right, Quadrature::Left}) {
    for (int l : {0, 2, 5}) {
      FilterConfig cfg;
      cfg.level = l;
      cfg.N = 3;
      cfg.T = 1;
      cfg.quadrature = q;
      cfg.key = SeedKey(99);
      const FilterOutput out = run_pf(s, g.dataset, cfg);
      const PotentialContext ctx(s, g.dataset, l, q);
      for (std::size_t i = 0; i < 3; ++i) {
        RandomStream rs(cfg.key, Purpose::Dynamics, l, i, 0);
        const UnitPath p = euler_unit(s, l, 0, s.x_star, rs);
        CHECK(out.terminal.endpoints[i] == p.end());
        CHECK(out.terminal.log_weights[i] == log_unit_potential(ctx, 0, p));
      }
      if (l == 0) continue;
      const FilterOutput cout = run_cpf(s, g.dataset, cfg);
      const PotentialContext cctx(s, g.dataset, l - 1, q);
      for (std::size_t i = 0; i < 3; ++i) {
        RandomStream rs(cfg.key, Purpose::Dynamics, l, i, 0);
        const auto [fine, coarse] = coupled_euler_unit(s, l, 0, s.x_star, s.x_star, rs);
        CHECK(cout.terminal.endpoints[i] == fine.end());
        CHECK(cout.terminal_coarse.endpoints[i] == coarse.end());
        CHECK(cout.terminal.log_weights[i] == log_unit_potential(ctx, 0, fine));
        CHECK(cout.terminal_coarse.log_weights[i] == log_unit_potential(cctx, 0, coarse));
      }
    }
  }
}
