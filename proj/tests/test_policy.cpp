#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"

#include "acsmc/error.hpp"
#include "acsmc/models.hpp"
#include "acsmc/policy.hpp"

using namespace acsmc;

namespace {

Matrix random_matrix(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

Matrix random_symmetric(int n, Rng& rng) {
  const Matrix m = random_matrix(n, n, rng);
  return 0.5 * (m + m.transpose());
}

QuadCoeffs random_coeffs(int m, int n, Rng& rng) {
  QuadCoeffs c;
  c.A = random_symmetric(m, rng);
  c.b = random_matrix(m, 1, rng);
  c.C = random_matrix(m, n, rng);
  c.D = random_symmetric(n, rng);
  c.e = random_matrix(n, 1, rng);
  c.f = rng.normal();
  return c;
}

// Term-by-term expansion with explicit index loops.
double expand(const QuadCoeffs& c, const Vector& z, const Vector& zp) {
  double q = c.f;
  for (int i = 0; i < zp.size(); ++i) {
    q += zp(i) * c.b(i);
    for (int j = 0; j < zp.size(); ++j) q += zp(i) * c.A(i, j) * zp(j);
    for (int j = 0; j < z.size(); ++j) q += zp(i) * c.C(i, j) * z(j);
  }
  for (int i = 0; i < z.size(); ++i) {
    q += z(i) * c.e(i);
    for (int j = 0; j < z.size(); ++j) q += z(i) * c.D(i, j) * z(j);
  }
  return -q;
}

double coeff_distance(const QuadCoeffs& x, const QuadCoeffs& y) {
  double m = std::abs(x.f - y.f);
  m = std::max(m, linalg::max_abs(x.A - y.A));
  m = std::max(m, linalg::max_abs(x.b - y.b));
  if (x.C.size()) m = std::max(m, linalg::max_abs(x.C - y.C));
  if (x.D.size()) m = std::max(m, linalg::max_abs(x.D - y.D));
  if (x.e.size()) m = std::max(m, linalg::max_abs(x.e - y.e));
  return m;
}

// Gauss–Hermite rule for ∫ f(x) e^{−x²} dx via the Golub–Welsch eigenproblem.
std::pair<Vector, Vector> gauss_hermite(int n) {
  Matrix j = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(j);
  const Vector w = std::sqrt(std::numbers::pi) * es.eigenvectors().row(0).transpose().array().square();
  return {es.eigenvalues(), w};
}

}  // namespace

TEST_CASE("log-policy evaluation") {
  const auto zero = QuadCoeffs::zero(2, 3);
  CHECK(eval_logpolicy(zero, Vector::Ones(3), Vector::Ones(2)) == 0.0);

  auto c = QuadCoeffs::zero(2, 0);
  c.A = Matrix::Identity(2, 2);
  CHECK(eval_logpolicy(c, Vector(0), Vector::Ones(2)) == -2.0);

  Rng rng(1);
  const auto r = random_coeffs(3, 2, rng);
  for (int i = 0; i < 20; ++i) {
    const Vector z = random_matrix(2, 1, rng), zp = random_matrix(3, 1, rng);
    CHECK(eval_logpolicy(r, z, zp) == doctest::Approx(expand(r, z, zp)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(eval_logpolicy(r, Vector::Ones(3), Vector::Ones(3)), InvalidInput);
}

TEST_CASE("log-quadratic fit") {
  Rng rng(2);
  const int m = 2, n = 2, count = 400;
  const Matrix z = 1.5 * random_matrix(n, count, rng);
  const Matrix zp = random_matrix(m, count, rng);

  SUBCASE("exact quadratic targets are recovered") {
    const auto truth = random_coeffs(m, n, rng);
    Vector targets(count);
    for (int i = 0; i < count; ++i) targets(i) = eval_logpolicy(truth, z.col(i), zp.col(i));
    const auto fit = fit_logquadratic(z, zp, targets, RidgeConfig{1e-8, true});
    CHECK(coeff_distance(fit, truth) < 1e-6);
    CHECK(fit.A.isApprox(fit.A.transpose(), 0.0));
    CHECK(fit.D.isApprox(fit.D.transpose(), 0.0));

    const double coarse = coeff_distance(fit_logquadratic(z, zp, targets, RidgeConfig{1e-6, true}), truth);
    const double fine = coeff_distance(fit_logquadratic(z, zp, targets, RidgeConfig{1e-10, true}), truth);
    CHECK(fine < coarse);
  }
  SUBCASE("constant targets") {
    const Vector targets = Vector::Constant(count, 3.2);
    const auto fit = fit_logquadratic(z, zp, targets, RidgeConfig{});
    CHECK(fit.f == doctest::Approx(-3.2).epsilon(1e-6));
    auto rest = fit;
    rest.f = 0.0;
    CHECK(coeff_distance(rest, QuadCoeffs::zero(m, n)) < 1e-6);
  }
  SUBCASE("rank-deficient support stays finite") {
    const Matrix same_z = z.col(0).replicate(1, count);
    const Matrix same_zp = zp.col(0).replicate(1, count);
    const Vector targets = random_matrix(count, 1, rng);
    const auto fit = fit_logquadratic(same_z, same_zp, targets, RidgeConfig{});
    CHECK(std::isfinite(fit.f));
    CHECK(fit.A.allFinite());
    CHECK(fit.C.allFinite());
    CHECK(fit.D.allFinite());
  }
  SUBCASE("initial-time form") {
    auto truth = random_coeffs(m, 0, rng);
    Vector targets(count);
    for (int i = 0; i < count; ++i) targets(i) = eval_logpolicy(truth, Vector(0), zp.col(i));
    const auto fit = fit_logquadratic(Matrix(0, count), zp, targets, RidgeConfig{1e-8, true});
    CHECK(fit.conditioning_dim() == 0);
    CHECK(coeff_distance(fit, truth) < 1e-6);
  }
  SUBCASE("non-finite target names its index") {
    Vector targets = Vector::Zero(count);
    targets(17) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(fit_logquadratic(z, zp, targets, RidgeConfig{}), doctest::Contains("17"), InvalidInput);
  }
}

TEST_CASE("lifting reduced coefficients") {
  Rng rng(3);
  const int d = 3, k = 2;
  const Matrix a = random_matrix(d, d, rng), b = random_matrix(d, k, rng);
  CHECK(dim_reduce_lift(QuadCoeffs::zero(d, 0), a, b).is_zero());

  const auto reduced = random_coeffs(d, 0, rng);
  const auto lifted = dim_reduce_lift(reduced, a, b);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Vector s = random_matrix(d, 1, rng), e = random_matrix(k, 1, rng);
    const Vector lin = a * s + b * e;
    worst = std::max(worst, std::abs(eval_logpolicy(lifted, s, e) - eval_logpolicy(reduced, Vector(0), lin)));
  }
  CHECK(worst < 1e-12);

  const auto initial = dim_reduce_lift_initial(reduced, b);
  const Vector e = random_matrix(k, 1, rng);
  CHECK(eval_logpolicy(initial, Vector(0), e) ==
        doctest::Approx(eval_logpolicy(reduced, Vector(0), Vector(b * e))).epsilon(1e-12));

  auto scalar = QuadCoeffs::zero(1, 0);
  scalar.A(0, 0) = 0.7;
  const auto s = dim_reduce_lift(scalar, Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 2.0));
  CHECK(s.D(0, 0) == doctest::Approx(0.25 * 0.7));
  CHECK(s.A(0, 0) == doctest::Approx(4.0 * 0.7));
  CHECK(s.C(0, 0) == doctest::Approx(2.0 * 0.5 * 2.0 * 0.7));
  CHECK_THROWS_AS(dim_reduce_lift(reduced, Matrix::Identity(2, 2), b), InvalidInput);
}

TEST_CASE("constrained refinement") {
  Rng rng(4);
  SUBCASE("zero increment") {
    QuadraticPolicy cur;
    for (int t = 0; t <= 3; ++t) cur.steps.push_back(random_coeffs(2, t == 0 ? 0 : 2, rng));
    for (auto& s : cur.steps) s.A = 0.3 * Matrix::Identity(2, 2);
    QuadraticPolicy inc;
    for (const auto& s : cur.steps) inc.steps.push_back(QuadCoeffs::zero(2, s.conditioning_dim()));
    const auto r = constrained_refine(cur, inc);
    for (double k : r.learning_rates) CHECK(k == 1.0);
    for (int t = 0; t <= 3; ++t) CHECK(coeff_distance(r.policy.steps[t], cur.steps[t]) == 0.0);
  }
  SUBCASE("scalar closed form") {
    const Matrix cur = Matrix::Constant(1, 1, 1.0 - kDefaultAlpha);
    const double k = learning_rate(cur, Matrix::Constant(1, 1, -2.0), kDefaultAlpha);
    CHECK(k == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(k == oracle::scalar_learning_rate(cur(0, 0), -2.0, kDefaultAlpha));
    CHECK(learning_rate(cur, Matrix::Constant(1, 1, -0.5), kDefaultAlpha) == 1.0);
  }
  SUBCASE("guard keeps the proposal covariance defined") {
    for (int trial = 0; trial < 200; ++trial) {
      auto cur = QuadCoeffs::zero(3, 2);
      cur.A = 0.2 * random_symmetric(3, rng);
      const double shift = linalg::symeig(cur.A).values(0);
      if (shift + kDefaultAlpha <= 0.0) cur.A -= (shift + kDefaultAlpha - 0.05) * Matrix::Identity(3, 3);
      auto inc = random_coeffs(3, 2, rng);
      inc.A *= 5.0;
      double kappa = 0.0;
      const auto out = constrained_refine_step(cur, inc, kDefaultAlpha, &kappa);
      CHECK(kappa > 0.0);
      CHECK(kappa <= 1.0);
      // The guard can stop exactly on the boundary, so αI + A is semidefinite up to roundoff.
      const Matrix u = kDefaultAlpha * Matrix::Identity(3, 3) + out.A;
      CHECK(linalg::symeig(u).values(0) > -1e-12);
      CHECK(linalg::is_positive_definite(Matrix::Identity(3, 3) + 2.0 * out.A));
      CHECK_NOTHROW(constrained_refine_step(out, inc, kDefaultAlpha));
    }
  }
  SUBCASE("a corrupted policy is rejected") {
    auto cur = QuadCoeffs::zero(1, 0);
    cur.A(0, 0) = -0.5;
    CHECK_THROWS_AS(constrained_refine_step(cur, QuadCoeffs::zero(1, 0), kDefaultAlpha), PolicyInvariantError);
  }
}

TEST_CASE("optimal policy of a linear-Gaussian model") {
  const auto s = oracle::reference_lgssm(7);
  LinearGaussianModel m(s);
  Rng rng(5);
  const auto sim = simulate(m, 6, rng);
  const Matrix& y = sim.observations;

  SUBCASE("terminal step is the tempered observation term") {
    const double lambda = 0.7;
    const auto p = optimal_policy_lgssm(s, y, lambda);
    const Matrix finv = s.obs_cov.inverse();
    const Vector r = y.col(5) - s.obs_offset;
    const Matrix a_bar = 0.5 * s.obs_loading.transpose() * finv * s.obs_loading;
    const Vector b_bar = -s.obs_loading.transpose() * finv * r;
    const double c_bar = 0.5 * r.dot(finv * r) + oracle::kLog2Pi + 0.5 * std::log(s.obs_cov.determinant());
    CHECK(linalg::max_abs(p.reduced[6].A - lambda * a_bar) < 1e-12);
    CHECK(linalg::max_abs(p.reduced[6].b - lambda * b_bar) < 1e-12);
    CHECK(p.reduced[6].f == doctest::Approx(lambda * c_bar).epsilon(1e-12));
  }
  SUBCASE("zero temperature gives zero coefficients") {
    const auto p = optimal_policy_lgssm(s, y, 0.0);
    for (const auto& c : p.reduced) CHECK(c.is_zero());
    for (const auto& c : p.lifted.steps) CHECK(c.is_zero());
  }
  SUBCASE("reduced form is the log predictive likelihood") {
    const auto p = optimal_policy_lgssm(s, y, 1.0);
    for (int t = 0; t <= 6; ++t) {
      for (int i = 0; i < 5; ++i) {
        const Vector st = oracle::normal_vector(2, rng);
        const double expected = oracle::log_future(s, y, t, st);
        CHECK(eval_logpolicy(p.reduced[t], Vector(0), st) == doctest::Approx(expected).epsilon(1e-9));
      }
    }
  }
  SUBCASE("lifted form agrees with the reduced form") {
    const auto p = optimal_policy_lgssm(s, y, 0.8);
    for (int t = 1; t <= 6; ++t) {
      const Vector prev = oracle::normal_vector(2, rng), e = oracle::normal_vector(2, rng);
      CHECK(eval_logpolicy(p.lifted.steps[t], prev, e) ==
            doctest::Approx(eval_logpolicy(p.reduced[t], Vector(0), Vector(s.A * prev + s.B * e))).epsilon(1e-10));
    }
  }
}

TEST_CASE("optimal policy against quadrature") {
  // Independent states: ψ*_1(s_1) = g(y_1|s_1)^λ ∫ g(y_2|s_2)^λ N(s_2; 0, b²) ds_2.
  const double b = 0.8, e = 1.3, f = 0.6, d = 0.2, lambda = 0.7;
  LinearGaussianSpec s;
  s.A = Matrix::Zero(1, 1);
  s.B = Matrix::Constant(1, 1, b);
  s.obs_offset = Vector::Constant(1, d);
  s.obs_loading = Matrix::Constant(1, 1, e);
  s.obs_cov = Matrix::Constant(1, 1, f);
  Matrix y(1, 2);
  y << 0.9, -0.4;
  const auto p = optimal_policy_lgssm(s, y, lambda);

  const auto [x, w] = gauss_hermite(60);
  double integral = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double s2 = std::sqrt(2.0) * b * x(i);
    const double r = y(0, 1) - d - e * s2;
    integral += w(i) * std::exp(lambda * (-0.5 * (oracle::kLog2Pi + std::log(f)) - 0.5 * r * r / f));
  }
  integral /= std::sqrt(std::numbers::pi);

  const double r1 = y(0, 0) - d;
  const double a_exp = lambda * e * e / (2.0 * f);
  const double b_exp = -lambda * e * r1 / f;
  const double f_exp = lambda * (0.5 * r1 * r1 / f + 0.5 * (oracle::kLog2Pi + std::log(f))) - std::log(integral);
  CHECK(std::abs(p.reduced[1].A(0, 0) - a_exp) < 1e-8);
  CHECK(std::abs(p.reduced[1].b(0) - b_exp) < 1e-8);
  CHECK(std::abs(p.reduced[1].f - f_exp) < 1e-8);
}

TEST_CASE("policy serialization round trip") {
  Rng rng(6);
  QuadraticPolicy p;
  p.steps.push_back(random_coeffs(2, 0, rng));
  for (int t = 1; t <= 4; ++t) p.steps.push_back(random_coeffs(2, 3, rng));
  const auto q = policy_from_json(nlohmann::json::parse(policy_to_json(p).dump()));
  REQUIRE(q.steps.size() == p.steps.size());
  for (std::size_t t = 0; t < p.steps.size(); ++t) CHECK(coeff_distance(p.steps[t], q.steps[t]) == 0.0);
  CHECK_THROWS_AS(policy_from_json(nlohmann::json{{"format", "other"}}), ConfigError);
  CHECK(QuadraticPolicy::constant_one(PolicyLayout{2, 2, 3}, 4).is_constant_one());
}
