#pragma once

#include <memory>
#include <string>
#include <vector>

#include "acsmc/linalg.hpp"
#include "acsmc/policy.hpp"
#include "acsmc/rng.hpp"

namespace acsmc {

/// Observations y_{1:T} are stored column-wise: a d_y × T matrix whose
/// column t − 1 holds y_t.
using Observations = Matrix;

struct ModelDims {
  int state = 0;  // d
  int noise = 0;  // d_noise (0 for density-driven models)
  int obs = 0;    // d_y

  void validate() const;
};

/// A latent path s_{0:T} (d × (T+1)) and, for noise-driven models, the
/// driving noises ε_{0:T} (d_noise × (T+1)).
struct Trajectory {
  Matrix states;
  Matrix noises;

  int horizon() const { return static_cast<int>(states.cols()) - 1; }
};

/// Twisted proposal q_t^ψ for one time step t >= 1, built once per
/// (policy step, model) and reused for every particle.
class TransitionKernel {
 public:
  virtual ~TransitionKernel() = default;

  /// Draws s_t ~ q_t^ψ(·|s_{t−1}); `noise` receives ε_t for noise-driven models.
  virtual void sample(const ConstVectorRef& prev, Rng& rng, VectorRef state, VectorRef noise) const = 0;

  /// log q_t(ψ_t | s_{t−1}) under the untwisted proposal.
  virtual double log_expectation(const ConstVectorRef& prev) const = 0;

  /// log ψ_t at a sampled transition.
  virtual double log_policy(const ConstVectorRef& prev, const ConstVectorRef& state,
                            const ConstVectorRef& noise) const = 0;

  /// Policy variables (z, z') for a transition, as used by regression.
  virtual void policy_variables(const ConstVectorRef& prev, const ConstVectorRef& state,
                                const ConstVectorRef& noise, VectorRef z, VectorRef zp) const = 0;
};

/// Twisted initial distribution q_0^ψ.
class InitialKernel {
 public:
  virtual ~InitialKernel() = default;
  virtual void sample(Rng& rng, VectorRef state, VectorRef noise) const = 0;
  /// log q_0(ψ_0)
  virtual double log_expectation() const = 0;
  virtual double log_policy(const ConstVectorRef& state, const ConstVectorRef& noise) const = 0;
};

/// Support points of one regression in ADP: column n of each matrix is the
/// n-th resampled transition (s_{t−1}^{(a)}, s_t^{(n)}, ε_t^{(n)}).
struct TransitionSupport {
  Matrix prev;
  Matrix states;
  Matrix noises;
};

/// Common contract every model consumed by the SMC engine satisfies.
///
/// Log densities are used end-to-end. The observation density may depend on
/// (s_{t−1}, s_t) jointly; transitions are time-homogeneous.
class StateSpaceModel {
 public:
  virtual ~StateSpaceModel() = default;

  virtual ModelDims dims() const = 0;
  virtual std::string family() const = 0;

  /// log g(y_t | s_{t−1}, s_t)
  virtual double obs_logdensity(int t, const ConstVectorRef& prev, const ConstVectorRef& state,
                                const ConstVectorRef& y) const = 0;

  virtual void sample_observation(int t, const ConstVectorRef& prev, const ConstVectorRef& state, Rng& rng,
                                  VectorRef y) const = 0;

  /// Draws s_0 (and ε_0) from the latent initial law.
  virtual void sample_initial_state(Rng& rng, VectorRef state, VectorRef noise) const = 0;

  /// Draws s_t (and ε_t) from the latent transition law.
  virtual void sample_transition(const ConstVectorRef& prev, Rng& rng, VectorRef state,
                                 VectorRef noise) const = 0;

  /// log of the uncontrolled weight apart from the observation factor:
  /// log w_t = λ log g + base_log_weight. Zero when the proposal is the
  /// latent transition itself.
  virtual double base_log_weight(const ConstVectorRef& prev, const ConstVectorRef& state) const = 0;

  virtual PolicyLayout policy_layout() const = 0;

  /// Kernels of the controlled SMC induced by one policy step. A null
  /// `coeffs` yields the uncontrolled proposal.
  virtual std::unique_ptr<InitialKernel> initial_kernel(const QuadCoeffs* coeffs) const = 0;
  virtual std::unique_ptr<TransitionKernel> transition_kernel(const QuadCoeffs* coeffs) const = 0;

  /// Regression of one ADP step in the model's policy variables.
  virtual QuadCoeffs fit_transition_increment(const TransitionSupport& support, const ConstVectorRef& targets,
                                              const RidgeConfig& ridge) const = 0;
  virtual QuadCoeffs fit_initial_increment(const ConstMatrixRef& states, const ConstMatrixRef& noises,
                                           const ConstVectorRef& targets, const RidgeConfig& ridge) const = 0;

  /// Throws PolicyInvariantError when a policy cannot define proposals.
  virtual void check_policy(const QuadraticPolicy& policy) const;
};

/// Model driven by Gaussian noise through deterministic maps
///   s_0 = Φ⁰(ε_0),  s_t = Φ(s_{t−1}, ε_t) = A s_{t−1} + B ε_t + c(s_{t−1}, ε_t),
/// with ε_t ~ N(0, I). Policies live on (s_{t−1}, ε_t) and are regressed on
/// the linearized state s̃_t = A s_{t−1} + B ε_t.
class NoiseDrivenModel : public StateSpaceModel {
 public:
  NoiseDrivenModel(Matrix state_matrix, Matrix noise_matrix, int obs_dim);

  ModelDims dims() const override;

  const Matrix& state_matrix() const { return a_; }
  const Matrix& noise_matrix() const { return b_; }

  /// Linear part of Φ⁰; s̃_0 = B₀ ε_0. Defaults to B.
  virtual const Matrix& initial_noise_matrix() const { return b_; }

  /// c(s_{t−1}, ε_t); zero for linear models.
  virtual void residual(const ConstVectorRef& prev, const ConstVectorRef& noise, VectorRef out) const = 0;
  virtual bool is_linear() const { return false; }

  /// Φ⁰(ε_0)
  virtual void initial_map(const ConstVectorRef& noise, VectorRef state) const = 0;

  /// Φ(s_{t−1}, ε_t) = A s + B ε + c(s, ε)
  void transition_map(const ConstVectorRef& prev, const ConstVectorRef& noise, VectorRef state) const;

  void sample_initial_state(Rng& rng, VectorRef state, VectorRef noise) const override;
  void sample_transition(const ConstVectorRef& prev, Rng& rng, VectorRef state,
                         VectorRef noise) const override;
  double base_log_weight(const ConstVectorRef&, const ConstVectorRef&) const override { return 0.0; }

  PolicyLayout policy_layout() const override;
  std::unique_ptr<InitialKernel> initial_kernel(const QuadCoeffs* coeffs) const override;
  std::unique_ptr<TransitionKernel> transition_kernel(const QuadCoeffs* coeffs) const override;
  QuadCoeffs fit_transition_increment(const TransitionSupport& support, const ConstVectorRef& targets,
                                      const RidgeConfig& ridge) const override;
  QuadCoeffs fit_initial_increment(const ConstMatrixRef& states, const ConstMatrixRef& noises,
                                   const ConstVectorRef& targets, const RidgeConfig& ridge) const override;
  void check_policy(const QuadraticPolicy& policy) const override;

 protected:
  Matrix a_;
  Matrix b_;
  int obs_dim_;
};

/// Model given by a transition density f(s_t|s_{t−1}) and a Gaussian proposal
/// on transformed variables z = ℓ(s):  ℓ(s_t) ~ N(η(s_{t−1}), Σ(s_{t−1})).
/// The initial state is deterministic. Policies live on (ℓ(s_{t−1}), ℓ(s_t)).
class DensityDrivenModel : public StateSpaceModel {
 public:
  ModelDims dims() const override;

  virtual int state_dim() const = 0;
  virtual int obs_dim() const = 0;

  virtual Vector initial_state() const = 0;
  virtual double transition_logdensity(const ConstVectorRef& prev, const ConstVectorRef& state) const = 0;

  virtual void transform(const ConstVectorRef& state, VectorRef z) const = 0;
  virtual void inverse_transform(const ConstVectorRef& z, VectorRef state) const = 0;
  /// log |det ∂ℓ/∂s| at `state`
  virtual double log_jacobian(const ConstVectorRef& state) const = 0;

  /// Proposal moments in transformed space.
  virtual void proposal_moments(const ConstVectorRef& prev, VectorRef mean, Matrix& cov) const = 0;

  /// log q_t(s_t | s_{t−1}) on the original state space.
  double proposal_logdensity(const ConstVectorRef& prev, const ConstVectorRef& state) const;

  void sample_initial_state(Rng& rng, VectorRef state, VectorRef noise) const override;
  double base_log_weight(const ConstVectorRef& prev, const ConstVectorRef& state) const override;

  PolicyLayout policy_layout() const override;
  std::unique_ptr<InitialKernel> initial_kernel(const QuadCoeffs* coeffs) const override;
  std::unique_ptr<TransitionKernel> transition_kernel(const QuadCoeffs* coeffs) const override;
  QuadCoeffs fit_transition_increment(const TransitionSupport& support, const ConstVectorRef& targets,
                                      const RidgeConfig& ridge) const override;
  QuadCoeffs fit_initial_increment(const ConstMatrixRef& states, const ConstMatrixRef& noises,
                                   const ConstVectorRef& targets, const RidgeConfig& ridge) const override;
};

/// λ · log g(y_t | s_{t−1}, s_t); exactly 0 at λ = 0.
double tempered_obs_logdensity(const StateSpaceModel& model, int t, const ConstVectorRef& prev,
                               const ConstVectorRef& state, const ConstVectorRef& y, double lambda);

struct Simulation {
  Trajectory trajectory;
  Observations observations;
};

/// Draws s_{0:T} from the latent process and y_{1:T} from the observation law.
Simulation simulate(const StateSpaceModel& model, int horizon, Rng& rng);

/// Σ_t log g(y_t | s_{t−1}, s_t) terms along a trajectory (length T).
std::vector<double> trajectory_log_obs(const StateSpaceModel& model, const Trajectory& path,
                                       const ConstMatrixRef& observations);

}  // namespace acsmc
