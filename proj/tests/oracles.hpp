#pragma once
// Independent reference computations for the tests. Everything here works on
// the stacked joint Gaussian or on a grid and shares no code path with the
// library's filters.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "acsmc/kalman.hpp"
#include "acsmc/model.hpp"
#include "acsmc/models.hpp"
#include "acsmc/smc2.hpp"
#include "acsmc/rng.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kLog2Pi = 1.8378770664093454836;

inline double mvn_logpdf(const VectorXd& x, const VectorXd& mean, const MatrixXd& cov) {
  Eigen::LLT<MatrixXd> llt(cov);
  const VectorXd r = x - mean;
  const VectorXd w = llt.matrixL().solve(r);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + logdet + w.squaredNorm());
}

/// Joint prior covariance of (s_0, ..., s_T), stacked as d(T+1) × d(T+1).
inline MatrixXd state_covariance(const acsmc::LinearGaussianSpec& s, int horizon) {
  const auto d = s.A.rows();
  const MatrixXd& b0 = s.B0.size() ? s.B0 : s.B;
  std::vector<MatrixXd> marg(horizon + 1);
  marg[0] = b0 * b0.transpose();
  for (int t = 1; t <= horizon; ++t) marg[t] = s.A * marg[t - 1] * s.A.transpose() + s.B * s.B.transpose();
  MatrixXd cov = MatrixXd::Zero(d * (horizon + 1), d * (horizon + 1));
  for (int i = 0; i <= horizon; ++i) {
    MatrixXd power = MatrixXd::Identity(d, d);
    for (int j = i; j <= horizon; ++j) {
      const MatrixXd c = power * marg[i];  // Cov(s_j, s_i)
      cov.block(j * d, i * d, d, d) = c;
      cov.block(i * d, j * d, d, d) = c.transpose();
      power = s.A * power;
    }
  }
  return cov;
}

struct StackedGaussian {
  VectorXd y_mean;    // stacked d_y T
  MatrixXd y_cov;
  MatrixXd cross;     // Cov(stacked states s_{0:T}, stacked y)
  MatrixXd state_cov;
};

/// Stacked moments of y_{1:T} with the observation covariance inflated to F/λ.
inline StackedGaussian stacked(const acsmc::LinearGaussianSpec& s, int horizon, double lambda = 1.0) {
  const auto d = s.A.rows();
  const auto dy = s.obs_offset.size();
  StackedGaussian g;
  g.state_cov = state_covariance(s, horizon);
  MatrixXd load = MatrixXd::Zero(dy * horizon, d * (horizon + 1));
  for (int t = 1; t <= horizon; ++t) load.block((t - 1) * dy, t * d, dy, d) = s.obs_loading;
  g.y_mean = s.obs_offset.replicate(horizon, 1);
  g.y_cov = load * g.state_cov * load.transpose();
  for (int t = 0; t < horizon; ++t) g.y_cov.block(t * dy, t * dy, dy, dy) += s.obs_cov / lambda;
  g.cross = g.state_cov * load.transpose();
  return g;
}

inline VectorXd stack_columns(const MatrixXd& y) { return Eigen::Map<const VectorXd>(y.data(), y.size()); }

/// log ∫ p(s) Π_t N(y_t; d + E s_t, F)^λ ds by direct stacked-Gaussian algebra.
inline double loglik(const acsmc::LinearGaussianSpec& s, const MatrixXd& y, double lambda = 1.0) {
  if (lambda == 0.0) return 0.0;
  const int horizon = static_cast<int>(y.cols());
  const auto dy = static_cast<double>(s.obs_offset.size());
  const auto g = stacked(s, horizon, lambda);
  Eigen::LLT<MatrixXd> f(s.obs_cov);
  const double logdet_f = 2.0 * f.matrixL().toDenseMatrix().diagonal().array().log().sum();
  // N(y; μ, F)^λ = N(y; μ, F/λ) · exp(c(λ))
  const double c = 0.5 * (1.0 - lambda) * (dy * kLog2Pi + logdet_f) - 0.5 * dy * std::log(lambda);
  return mvn_logpdf(stack_columns(y), g.y_mean, g.y_cov) + horizon * c;
}

/// Posterior mean and covariance of s_t given y_{1:T} (λ = 1).
inline std::pair<VectorXd, MatrixXd> smoother_marginal(const acsmc::LinearGaussianSpec& s, const MatrixXd& y, int t) {
  const int horizon = static_cast<int>(y.cols());
  const auto d = s.A.rows();
  const auto g = stacked(s, horizon);
  Eigen::LDLT<MatrixXd> yc(g.y_cov);
  const MatrixXd cross_t = g.cross.middleRows(t * d, d);
  const VectorXd mean = cross_t * yc.solve(stack_columns(y) - g.y_mean);
  const MatrixXd cov = g.state_cov.block(t * d, t * d, d, d) - cross_t * yc.solve(cross_t.transpose());
  return {mean, cov};
}

/// log p(y_{t:T} | s_t) for t >= 1, or log p(y_{1:T} | s_0) for t = 0, at λ = 1.
inline double log_future(const acsmc::LinearGaussianSpec& s, const MatrixXd& y, int t, const VectorXd& state) {
  const int horizon = static_cast<int>(y.cols());
  const int first = std::max(t, 1);
  const int count = horizon - first + 1;
  const auto d = s.A.rows();
  const auto dy = s.obs_offset.size();
  // s_{t+k} = A^k s_t + noise with covariance Σ_k; y_{t+k} = d + E s_{t+k} + v.
  std::vector<MatrixXd> power(horizon + 1), noise(horizon + 1);
  power[0] = MatrixXd::Identity(d, d);
  noise[0] = MatrixXd::Zero(d, d);
  for (int k = 1; k <= horizon; ++k) {
    power[k] = s.A * power[k - 1];
    noise[k] = s.A * noise[k - 1] * s.A.transpose() + s.B * s.B.transpose();
  }
  VectorXd mean(dy * count);
  MatrixXd cov(dy * count, dy * count);
  for (int i = 0; i < count; ++i) {
    const int ki = first + i - t;
    mean.segment(i * dy, dy) = s.obs_offset + s.obs_loading * power[ki] * state;
    for (int j = 0; j < count; ++j) {
      const int kj = first + j - t;
      // Cov(s_{t+ki}, s_{t+kj} | s_t) = A^{ki−kj} Σ_{kj} for ki >= kj.
      const MatrixXd c = ki >= kj ? MatrixXd(power[ki - kj] * noise[kj])
                                  : MatrixXd(noise[ki] * power[kj - ki].transpose());
      cov.block(i * dy, j * dy, dy, dy) = s.obs_loading * c * s.obs_loading.transpose();
    }
    cov.block(i * dy, i * dy, dy, dy) += s.obs_cov;
  }
  VectorXd ys(dy * count);
  for (int i = 0; i < count; ++i) ys.segment(i * dy, dy) = y.col(first + i - 1);
  return mvn_logpdf(ys, mean, cov);
}

/// Unknown observation offset θ ~ N(0, prior_var) added to every y_t of a
/// linear-Gaussian model with zero offset: y | θ ~ N(θ·1, S).
struct ConjugateOffset {
  double post_mean = 0.0;
  double post_sd = 0.0;
  double log_evidence = 0.0;
};

inline ConjugateOffset conjugate_offset(const acsmc::LinearGaussianSpec& s, const MatrixXd& y, double prior_var) {
  const int horizon = static_cast<int>(y.cols());
  const auto g = stacked(s, horizon);
  const VectorXd ys = stack_columns(y);
  const VectorXd one = VectorXd::Ones(ys.size());
  Eigen::LDLT<MatrixXd> sc(g.y_cov);
  const double prec = 1.0 / prior_var + one.dot(sc.solve(one));
  ConjugateOffset out;
  out.post_mean = one.dot(sc.solve(ys - g.y_mean)) / prec;
  out.post_sd = 1.0 / std::sqrt(prec);
  out.log_evidence = mvn_logpdf(ys, g.y_mean, g.y_cov + prior_var * one * one.transpose());
  return out;
}

/// Scalar linear-Gaussian toy whose observation offset is the parameter.
inline acsmc::LinearGaussianSpec offset_toy_spec(double offset = 0.0) {
  acsmc::LinearGaussianSpec s;
  s.A = MatrixXd::Constant(1, 1, 0.7);
  s.B = MatrixXd::Constant(1, 1, 0.5);
  s.obs_offset = VectorXd::Constant(1, offset);
  s.obs_loading = MatrixXd::Identity(1, 1);
  s.obs_cov = MatrixXd::Constant(1, 1, 0.3);
  return s;
}

inline acsmc::ModelFactory offset_toy_factory() {
  return [](const acsmc::Vector& theta) -> std::unique_ptr<acsmc::StateSpaceModel> {
    return std::make_unique<acsmc::LinearGaussianModel>(offset_toy_spec(theta(0)));
  };
}

// ---------------------------------------------------------------------------
// Scalar quadratic map: s_t = a s_{t−1} + b ε_t + κ s_{t−1}², s_0 = b0 ε_0,
// y_t ~ N(s_t, r). Transitions stay Gaussian given s_{t−1}, so a grid
// forward recursion gives the likelihood to quadrature accuracy.

class ScalarQuadraticMap final : public acsmc::NoiseDrivenModel {
 public:
  ScalarQuadraticMap(double a, double b, double kappa, double b0, double r)
      : NoiseDrivenModel(MatrixXd::Constant(1, 1, a), MatrixXd::Constant(1, 1, b), 1),
        a_val(a), b_val(b), kappa(kappa), b0_val(b0), r(r), b0_(MatrixXd::Constant(1, 1, b0)) {}

  std::string family() const override { return "scalar-quadratic"; }
  const MatrixXd& initial_noise_matrix() const override { return b0_; }
  void residual(const acsmc::ConstVectorRef& prev, const acsmc::ConstVectorRef&, acsmc::VectorRef out) const override {
    out(0) = kappa * prev(0) * prev(0);
  }
  void initial_map(const acsmc::ConstVectorRef& noise, acsmc::VectorRef state) const override {
    state(0) = b0_val * noise(0);
  }
  double obs_logdensity(int, const acsmc::ConstVectorRef&, const acsmc::ConstVectorRef& state,
                        const acsmc::ConstVectorRef& y) const override {
    const double e = y(0) - state(0);
    return -0.5 * (kLog2Pi + std::log(r) + e * e / r);
  }
  void sample_observation(int, const acsmc::ConstVectorRef&, const acsmc::ConstVectorRef& state, acsmc::Rng& rng,
                          acsmc::VectorRef y) const override {
    y(0) = state(0) + std::sqrt(r) * rng.normal();
  }

  double a_val, b_val, kappa, b0_val, r;

 private:
  MatrixXd b0_;
};

/// Scalar AR(1) state whose observation log-density is an arbitrary function
/// of (t, s_t); used to provoke weight failures.
class HookedScalarModel final : public acsmc::NoiseDrivenModel {
 public:
  using Hook = std::function<double(int, double)>;
  HookedScalarModel(double a, double b, Hook hook)
      : NoiseDrivenModel(MatrixXd::Constant(1, 1, a), MatrixXd::Constant(1, 1, b), 1), b_val(b), hook(std::move(hook)) {}

  std::string family() const override { return "hooked"; }
  void residual(const acsmc::ConstVectorRef&, const acsmc::ConstVectorRef&, acsmc::VectorRef out) const override {
    out.setZero();
  }
  bool is_linear() const override { return true; }
  void initial_map(const acsmc::ConstVectorRef& noise, acsmc::VectorRef state) const override {
    state(0) = b_val * noise(0);
  }
  double obs_logdensity(int t, const acsmc::ConstVectorRef&, const acsmc::ConstVectorRef& state,
                        const acsmc::ConstVectorRef&) const override {
    return hook(t, state(0));
  }
  void sample_observation(int, const acsmc::ConstVectorRef&, const acsmc::ConstVectorRef& state, acsmc::Rng& rng,
                          acsmc::VectorRef y) const override {
    y(0) = state(0) + rng.normal();
  }

  double b_val;
  Hook hook;
};

/// log p(y_{1:T}) for ScalarQuadraticMap by trapezoidal forward recursion on [lo, hi].
inline double grid_loglik(const ScalarQuadraticMap& m, const MatrixXd& y, double lo, double hi, int points) {
  const double h = (hi - lo) / (points - 1);
  std::vector<double> x(points), w(points, h);
  for (int i = 0; i < points; ++i) x[i] = lo + i * h;
  w.front() = w.back() = 0.5 * h;
  auto normal = [](double v, double mean, double var) {
    return std::exp(-0.5 * (v - mean) * (v - mean) / var) / std::sqrt(2.0 * std::numbers::pi * var);
  };
  // Filtering density (unnormalized by the running evidence, kept as log scale).
  std::vector<double> dens(points);
  for (int i = 0; i < points; ++i) dens[i] = normal(x[i], 0.0, m.b0_val * m.b0_val);
  double log_z = 0.0;
  const double q = m.b_val * m.b_val;
  for (int t = 0; t < y.cols(); ++t) {
    std::vector<double> pred(points, 0.0);
    for (int j = 0; j < points; ++j) {
      if (dens[j] == 0.0) continue;
      const double mean = m.a_val * x[j] + m.kappa * x[j] * x[j];
      for (int i = 0; i < points; ++i) pred[i] += w[j] * dens[j] * normal(x[i], mean, q);
    }
    double z = 0.0;
    for (int i = 0; i < points; ++i) {
      pred[i] *= normal(y(0, t), x[i], m.r);
      z += w[i] * pred[i];
    }
    for (int i = 0; i < points; ++i) dens[i] = pred[i] / z;
    log_z += std::log(z);
  }
  return log_z;
}

// ---------------------------------------------------------------------------

/// Root of the two-particle ESS (1 + e^{−λc})² / (1 + e^{−2λc}) = 2κ for κ in (1/2, 1).
inline double two_particle_root(double c, double kappa) {
  // u = e^{−λc} solves (1 − 2κ)u² + 2u + (1 − 2κ) = 0 with u in (0, 1).
  const double a = 1.0 - 2.0 * kappa;
  const double u = (-2.0 + std::sqrt(4.0 - 4.0 * a * a)) / (2.0 * a);
  return -std::log(u) / c;
}

/// Scalar learning rate: κ = 1 if 1 + Ã/(α + A) > 0, else (2^−52 − 1)(α + A)/Ã.
inline double scalar_learning_rate(double current, double increment, double alpha) {
  const double lam = increment / (alpha + current);
  if (1.0 + lam > 0.0) return 1.0;
  return std::min(1.0, (std::ldexp(1.0, -52) - 1.0) / lam);
}

inline VectorXd normal_vector(int n, acsmc::Rng& rng) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

inline MatrixXd random_stable(int d, acsmc::Rng& rng, double radius = 0.9) {
  MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  const double rho = Eigen::EigenSolver<MatrixXd>(a).eigenvalues().cwiseAbs().maxCoeff();
  return a * (radius / rho);
}

inline MatrixXd random_spd(int d, acsmc::Rng& rng, double jitter = 0.5) {
  MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
  return m * m.transpose() + jitter * MatrixXd::Identity(d, d);
}

/// The two-state linear-Gaussian model used across tests.
inline acsmc::LinearGaussianSpec reference_lgssm(std::uint64_t seed = 7, double obs_var = 0.5) {
  acsmc::Rng rng(seed);
  acsmc::LinearGaussianSpec s;
  s.A = random_stable(2, rng, 0.8);
  s.B = MatrixXd(2, 2);
  s.B << 0.7, 0.0, 0.2, 0.5;
  s.obs_offset = VectorXd::Constant(2, 0.3);
  s.obs_loading = MatrixXd::Identity(2, 2);
  s.obs_loading(0, 1) = 0.4;
  s.obs_cov = obs_var * MatrixXd::Identity(2, 2);
  return s;
}

/// Mean and standard error of a series by non-overlapping batch means.
inline std::pair<double, double> batch_means(const std::vector<double>& x, int batches) {
  const std::size_t size = x.size() / batches;
  std::vector<double> m(batches, 0.0);
  for (int b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < size; ++i) m[b] += x[b * size + i];
    m[b] /= static_cast<double>(size);
  }
  double mean = 0.0;
  for (double v : m) mean += v;
  mean /= batches;
  double ss = 0.0;
  for (double v : m) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (batches - 1) / batches)};
}

}  // namespace oracle
