#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"

#include "acsmc/annealing.hpp"
#include "acsmc/error.hpp"
#include "acsmc/models.hpp"

using namespace acsmc;

namespace {

double variance(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

}  // namespace

TEST_CASE("temperature ladders") {
  const auto u = TemperatureLadder::uniform(5);
  CHECK(u.values == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK_NOTHROW(u.validate());
  CHECK_THROWS_AS(TemperatureLadder::uniform(1), InvalidInput);
  for (const std::vector<double>& bad : std::vector<std::vector<double>>{
           {}, {0.1, 0.5}, {0.0, 0.5, 0.5}, {0.0, 0.7, 0.3}, {0.0, 1.2}}) {
    TemperatureLadder l;
    l.values = bad;
    CHECK_THROWS_AS(l.validate(), InvalidInput);
  }
  TemperatureLadder partial;
  partial.values = {0.0, 0.3};
  CHECK_NOTHROW(partial.validate());
}

TEST_CASE("zero-temperature ladder is prior sampling") {
  LinearGaussianModel m(oracle::reference_lgssm());
  Rng sim(1);
  const Matrix y = simulate(m, 10, sim).observations;
  Rng a(42), b(42);
  const auto r = run_acsmc(m, y, TemperatureLadder{}, 64, a);
  const auto bpf = run_bpf(m, y, 0.0, 64, b);
  CHECK(r.output.log_likelihood == 0.0);
  CHECK(r.policy.is_constant_one());
  REQUIRE(r.stages.size() == 1);
  for (int t = 0; t <= 10; ++t) {
    CHECK(r.output.particles.states[t] == bpf.particles.states[t]);
    CHECK(r.output.particles.noises[t] == bpf.particles.noises[t]);
  }
  CHECK(r.output.trajectory.states == bpf.trajectory.states);
}

TEST_CASE("annealed controlled SMC on a linear-Gaussian model") {
  auto spec = oracle::reference_lgssm(7, 0.2);
  LinearGaussianModel m(spec);
  Rng sim(2);
  const Matrix y = simulate(m, 50, sim).observations;
  const double exact = kalman_loglik(spec, y, 1.0);
  const auto ladder = TemperatureLadder::uniform(5);

  std::vector<double> ac, bpf;
  int healthy = 0;
  const int reps = 100;
  for (int r = 0; r < reps; ++r) {
    Rng a(1000 + r), b(5000 + r);
    const auto res = run_acsmc(m, y, ladder, 256, a);
    ac.push_back(res.output.log_likelihood);
    if (res.output.min_ess() >= 0.5 * 256) ++healthy;
    bpf.push_back(run_bpf(m, y, 1.0, 1024, b).log_likelihood);
    if (r == 0) {
      REQUIRE(res.stages.size() == 5);
      for (std::size_t i = 0; i < 5; ++i) {
        CHECK(res.stages[i].stage == static_cast<int>(i));
        CHECK(res.stages[i].lambda == ladder.values[i]);
      }
      CHECK(res.stages.back().log_likelihood == res.output.log_likelihood);
    }
  }
  CHECK(variance(ac) <= 1e-3 * variance(bpf));
  CHECK(healthy >= 90);

  double shifted = 0.0, shifted2 = 0.0;
  for (double v : ac) {
    shifted += std::exp(v - exact);
    shifted2 += std::exp(2.0 * (v - exact));
  }
  const double mean = shifted / reps;
  const double se = std::sqrt((shifted2 / reps - mean * mean) / (reps - 1));
  CHECK(std::abs(mean - 1.0) < 4.0 * se + 1e-12);
}

TEST_CASE("annealed controlled SMC on a nonlinear model") {
  oracle::ScalarQuadraticMap m(0.5, 0.6, 0.15, 1.0, 0.4);
  Rng sim(3);
  const Matrix y = simulate(m, 5, sim).observations;
  const double exact = oracle::grid_loglik(m, y, -8.0, 12.0, 2001);
  const int reps = 500;
  double s1 = 0.0, s2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    Rng rng(200 + r);
    const double v = std::exp(run_acsmc(m, y, TemperatureLadder::uniform(5), 128, rng).output.log_likelihood - exact);
    s1 += v;
    s2 += v * v;
  }
  const double mean = s1 / reps;
  const double se = std::sqrt((s2 / reps - mean * mean) / (reps - 1));
  CHECK(std::abs(mean - 1.0) < 4.0 * se);
}

TEST_CASE("stage failures report the stage") {
  oracle::HookedScalarModel m(0.5, 1.0, [](int t, double s) {
    return t == 2 ? -std::numeric_limits<double>::infinity() : -0.5 * s * s;
  });
  const Matrix y = Matrix::Zero(1, 4);
  Rng rng(1);
  try {
    run_acsmc(m, y, TemperatureLadder::uniform(3), 32, rng);
    FAIL("expected StageFailure");
  } catch (const StageFailure& e) {
    CHECK(e.stage() == 1);
  }
}

TEST_CASE("conditional kernel preserves the smoothing distribution") {
  LinearGaussianSpec s;
  s.A = Matrix::Constant(1, 1, 0.8);
  s.B = Matrix::Constant(1, 1, 0.6);
  s.obs_offset = Vector::Zero(1);
  s.obs_loading = Matrix::Identity(1, 1);
  s.obs_cov = Matrix::Constant(1, 1, 0.5);
  LinearGaussianModel m(s);
  Rng sim(4);
  const Matrix y = simulate(m, 3, sim).observations;
  const auto sm = kalman_smoother_marginals(s, y);

  Rng rng(5);
  Trajectory ref;
  ref.states = kalman_smoother_draw(s, y, rng);
  ref.noises.resize(1, 4);
  ref.noises(0, 0) = ref.states(0, 0) / 0.6;
  for (int t = 1; t <= 3; ++t) ref.noises(0, t) = (ref.states(0, t) - 0.8 * ref.states(0, t - 1)) / 0.6;

  const auto policy = optimal_policy_lgssm(s, y, 0.5);
  std::vector<double> first, second;
  for (int sweep = 0; sweep < 4000; ++sweep) {
    ref = run_conditional_csmc(m, y, 1.0, &policy.lifted, 4, ref, rng).trajectory;
    const double v = ref.states(0, 1);
    first.push_back(v);
    second.push_back((v - sm.means[1](0)) * (v - sm.means[1](0)));
  }
  const auto [mean, mean_se] = oracle::batch_means(first, 40);
  const auto [var, var_se] = oracle::batch_means(second, 40);
  CHECK(std::abs(mean - sm.means[1](0)) < 4.0 * mean_se);
  CHECK(std::abs(var - sm.covs[1](0, 0)) < 4.0 * var_se);
}
