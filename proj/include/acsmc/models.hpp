#pragma once

#include <functional>
#include <vector>

#include "acsmc/kalman.hpp"
#include "acsmc/model.hpp"

namespace acsmc {

/// N(y; d + E s_t, F), shared by the linear and quadratic families.
class GaussianObservation {
 public:
  GaussianObservation() = default;
  GaussianObservation(Vector offset, Matrix loading, Matrix cov);

  double logdensity(const ConstVectorRef& state, const ConstVectorRef& y) const;
  void sample(const ConstVectorRef& state, Rng& rng, VectorRef y) const;

  const Vector& offset() const { return offset_; }
  const Matrix& loading() const { return loading_; }
  const Matrix& cov() const { return cov_; }

 private:
  Vector offset_;
  Matrix loading_;
  Matrix cov_;
  Matrix chol_;
  double log_norm_ = 0.0;  // −½(d_y log 2π + log det F)
};

/// Linear-Gaussian state-space model (c ≡ 0).
class LinearGaussianModel final : public NoiseDrivenModel {
 public:
  explicit LinearGaussianModel(LinearGaussianSpec spec);

  std::string family() const override { return "lgssm"; }
  const LinearGaussianSpec& spec() const { return spec_; }

  const Matrix& initial_noise_matrix() const override { return b0_; }
  void residual(const ConstVectorRef&, const ConstVectorRef&, VectorRef out) const override { out.setZero(); }
  bool is_linear() const override { return true; }
  void initial_map(const ConstVectorRef& noise, VectorRef state) const override;

  double obs_logdensity(int t, const ConstVectorRef& prev, const ConstVectorRef& state,
                        const ConstVectorRef& y) const override;
  void sample_observation(int t, const ConstVectorRef& prev, const ConstVectorRef& state, Rng& rng,
                          VectorRef y) const override;

 private:
  LinearGaussianSpec spec_;
  Matrix b0_;
  GaussianObservation obs_;
};

/// Second-order-with-pruning state space: s = (x, z) with
///   z_t = ρ z_{t−1} + Σ ε_t,
///   x_t = c + L₁ x_{t−1} + L₂ z_t + Q(x_{t−1}, z_t),   Q(u)_i = uᵀ Q_i u.
struct QuadraticSsmSpec {
  Matrix L1;                 // d_x × d_x
  Matrix L2;                 // d_x × d_z
  Vector constant;           // d_x
  std::vector<Matrix> quad;  // d_x matrices of size d × d (empty means zero)
  Matrix rho;                // d_z × d_z
  Matrix sigma;              // d_z × d_z
  Vector obs_offset;
  Matrix obs_loading;        // d_y × d
  Matrix obs_cov;

  int endogenous_dim() const { return static_cast<int>(L1.rows()); }
  int exogenous_dim() const { return static_cast<int>(rho.rows()); }

  void validate() const;
  /// Block-assembled A = [[L₁, L₂ρ], [0, ρ]] and B = [[L₂Σ], [Σ]].
  Matrix state_matrix() const;
  Matrix noise_matrix() const;
  /// The linear part with c and Q suppressed.
  LinearGaussianSpec linear_part() const;
};

LinearGaussianModel build_lgssm(const QuadraticSsmSpec& spec);

class QuadraticSsm final : public NoiseDrivenModel {
 public:
  explicit QuadraticSsm(QuadraticSsmSpec spec);

  std::string family() const override { return "quadratic"; }
  const QuadraticSsmSpec& spec() const { return spec_; }

  /// (c + Q(x_{t−1}, z_t), 0) with z_t = ρ z_{t−1} + Σ ε_t.
  void residual(const ConstVectorRef& prev, const ConstVectorRef& noise, VectorRef out) const override;
  /// z_0 = Σ ε_0, x_0 = c + L₂ z_0 + Q(0, z_0).
  void initial_map(const ConstVectorRef& noise, VectorRef state) const override;

  double obs_logdensity(int t, const ConstVectorRef& prev, const ConstVectorRef& state,
                        const ConstVectorRef& y) const override;
  void sample_observation(int t, const ConstVectorRef& prev, const ConstVectorRef& state, Rng& rng,
                          VectorRef y) const override;

 private:
  void quadratic_block(const ConstVectorRef& u, VectorRef out) const;

  QuadraticSsmSpec spec_;
  GaussianObservation obs_;
};

QuadraticSsm build_quadratic_ssm(const QuadraticSsmSpec& spec);

// ---------------------------------------------------------------------------
// Autoregressive gamma volatility.

struct ArgParams {
  double nu = 0.0;     // persistence, in [0, 1)
  double shape = 2.0;  // φ_s
  double scale = 1.0;  // c

  void validate() const;
  double conditional_mean(double prev) const { return shape * scale + nu * prev; }
  double conditional_variance(double prev) const { return shape * scale * scale + 2.0 * scale * nu * prev; }
  double long_run_mean() const { return shape * scale / (1.0 - nu); }
};

/// log I_v(x) for v > −1, x >= 0: log-space series for x <= 50, the
/// large-argument expansion above, falling back to the series when the
/// expansion does not converge.
double log_bessel_i(double order, double x);

/// Non-central gamma transition log-density of σ²_t given σ²_{t−1}.
double arg_transition_logdensity(const ArgParams& p, double prev, double next);

/// Poisson mixture of gammas: k ~ P(ν σ²_{t−1}/c), σ²_t ~ G(φ_s + k, c).
double arg_sample(const ArgParams& p, double prev, Rng& rng);

// ---------------------------------------------------------------------------
// Long-run-risk model with ARG volatility.

/// Market return M(x_{t−1}, σ²_{t−1}, x_t, σ²_t, Δd_t) and risk-free rate R(x_t, σ²_t).
using MarketReturnFn = std::function<double(double, double, double, double, double)>;
using RiskFreeFn = std::function<double(double, double)>;

/// Default pricing hooks: affine in their arguments.
struct AffinePricing {
  // M = m0 + m_xprev x_{t−1} + m_vprev σ²_{t−1} + m_x x_t + m_v σ²_t + m_d Δd_t
  double m0 = 0.0, m_xprev = 0.0, m_vprev = 0.0, m_x = 0.0, m_v = 0.0, m_d = 1.0;
  // R = r0 + r_x x_t + r_v σ²_t
  double r0 = 0.0, r_x = 0.0, r_v = 0.0;

  MarketReturnFn market() const;
  RiskFreeFn riskfree() const;
};

struct LrrSpec {
  // Preferences, consumed only by user pricing hooks.
  double delta = 0.998, gamma = 10.0, psi = 1.5;
  double mu = 0.0015, rho = 0.98, phi_x = 0.04;
  ArgParams vol{0.99, 2.0, 1e-6};
  double mu_d = 0.0015, Phi = 3.0, phi_dc = 1.0, phi_d = 4.5;
  double phi_m = 0.001, phi_r = 0.001;
  MarketReturnFn market;  // empty means the affine default
  RiskFreeFn riskfree;
  AffinePricing pricing;

  /// Throws InvalidInput on out-of-support parameters (including Feller φ_s > 1).
  void validate() const;
};

class LrrModel final : public DensityDrivenModel {
 public:
  explicit LrrModel(LrrSpec spec);

  std::string family() const override { return "lrr"; }
  const LrrSpec& spec() const { return spec_; }

  int state_dim() const override { return 2; }
  int obs_dim() const override { return 4; }
  Vector initial_state() const override;
  double transition_logdensity(const ConstVectorRef& prev, const ConstVectorRef& state) const override;
  void transform(const ConstVectorRef& state, VectorRef z) const override;
  void inverse_transform(const ConstVectorRef& z, VectorRef state) const override;
  double log_jacobian(const ConstVectorRef& state) const override;
  void proposal_moments(const ConstVectorRef& prev, VectorRef mean, Matrix& cov) const override;
  double base_log_weight(const ConstVectorRef& prev, const ConstVectorRef& state) const override;

  void sample_transition(const ConstVectorRef& prev, Rng& rng, VectorRef state, VectorRef noise) const override;
  double obs_logdensity(int t, const ConstVectorRef& prev, const ConstVectorRef& state,
                        const ConstVectorRef& y) const override;
  void sample_observation(int t, const ConstVectorRef& prev, const ConstVectorRef& state, Rng& rng,
                          VectorRef y) const override;

  /// Log-normal proposal parameters (m_q, v_q) for σ²_t given σ²_{t−1}.
  std::pair<double, double> lognormal_parameters(double prev_var) const;

 private:
  LrrSpec spec_;
  MarketReturnFn market_;
  RiskFreeFn riskfree_;
};

}  // namespace acsmc
