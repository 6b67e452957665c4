#include "acsmc/model.hpp"

#include <cmath>
#include <string>

#include "acsmc/error.hpp"
#include "acsmc/kalman.hpp"

namespace acsmc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void fill_normal(Rng& rng, VectorRef out) {
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = rng.normal();
}

bool is_untwisted(const QuadCoeffs* c) { return c == nullptr || c->is_zero(); }

// Uncontrolled kernels: the model's own proposal with ψ ≡ 1.
class PlainTransition final : public TransitionKernel {
 public:
  explicit PlainTransition(const StateSpaceModel& m) : model_(m) {}
  void sample(const ConstVectorRef& prev, Rng& rng, VectorRef state, VectorRef noise) const override {
    model_.sample_transition(prev, rng, state, noise);
  }
  double log_expectation(const ConstVectorRef&) const override { return 0.0; }
  double log_policy(const ConstVectorRef&, const ConstVectorRef&, const ConstVectorRef&) const override {
    return 0.0;
  }
  void policy_variables(const ConstVectorRef&, const ConstVectorRef&, const ConstVectorRef&, VectorRef,
                        VectorRef) const override {}

 private:
  const StateSpaceModel& model_;
};

class PlainInitial final : public InitialKernel {
 public:
  explicit PlainInitial(const StateSpaceModel& m) : model_(m) {}
  void sample(Rng& rng, VectorRef state, VectorRef noise) const override {
    model_.sample_initial_state(rng, state, noise);
  }
  double log_expectation() const override { return 0.0; }
  double log_policy(const ConstVectorRef&, const ConstVectorRef&) const override { return 0.0; }

 private:
  const StateSpaceModel& model_;
};

// Gaussian twist of ε ~ N(0, I) by exp(−εᵀAε − εᵀ(b + C s) − …):
// ε ~ N(−K(b + C s), K) with K = (I + 2A)⁻¹.
struct NoiseTwist {
  Matrix k;
  Matrix k_chol;
  double half_logdet_k = 0.0;

  explicit NoiseTwist(const QuadCoeffs& c) {
    const auto m = c.proposal_dim();
    const Matrix precision = linalg::symmetrize(Matrix::Identity(m, m) + 2.0 * c.A);
    Eigen::LLT<Matrix> llt(precision);
    if (llt.info() != Eigen::Success)
      throw PolicyInvariantError("twisted proposal: I + 2A is not positive definite");
    k = llt.solve(Matrix::Identity(m, m));
    k = linalg::symmetrize(k);
    Eigen::LLT<Matrix> k_llt(k);
    if (k_llt.info() != Eigen::Success) throw PolicyInvariantError("twisted proposal: covariance not SPD");
    k_chol = k_llt.matrixL();
    half_logdet_k = -Matrix(llt.matrixL()).diagonal().array().log().sum();
  }
};

class NoiseTransition final : public TransitionKernel {
 public:
  NoiseTransition(const NoiseDrivenModel& m, const QuadCoeffs& c) : model_(m), coeffs_(c), twist_(c) {}

  void sample(const ConstVectorRef& prev, Rng& rng, VectorRef state, VectorRef noise) const override {
    Vector z(noise.size());
    fill_normal(rng, z);
    noise = -twist_.k * (coeffs_.b + coeffs_.C * prev) + twist_.k_chol * z;
    model_.transition_map(prev, noise, state);
  }
  double log_expectation(const ConstVectorRef& prev) const override {
    const Vector v = coeffs_.b + coeffs_.C * prev;
    return twist_.half_logdet_k + 0.5 * v.dot(twist_.k * v) - (prev.dot(coeffs_.D * prev) + prev.dot(coeffs_.e) + coeffs_.f);
  }
  double log_policy(const ConstVectorRef& prev, const ConstVectorRef&, const ConstVectorRef& noise) const override {
    return -coeffs_.quadratic(prev, noise);
  }
  void policy_variables(const ConstVectorRef& prev, const ConstVectorRef&, const ConstVectorRef& noise, VectorRef z,
                        VectorRef zp) const override {
    z = prev;
    zp = noise;
  }

 private:
  const NoiseDrivenModel& model_;
  QuadCoeffs coeffs_;
  NoiseTwist twist_;
};

class NoiseInitial final : public InitialKernel {
 public:
  NoiseInitial(const NoiseDrivenModel& m, const QuadCoeffs& c) : model_(m), coeffs_(c), twist_(c) {}

  void sample(Rng& rng, VectorRef state, VectorRef noise) const override {
    Vector z(noise.size());
    fill_normal(rng, z);
    noise = -twist_.k * coeffs_.b + twist_.k_chol * z;
    model_.initial_map(noise, state);
  }
  double log_expectation() const override {
    return twist_.half_logdet_k + 0.5 * coeffs_.b.dot(twist_.k * coeffs_.b) - coeffs_.f;
  }
  double log_policy(const ConstVectorRef&, const ConstVectorRef& noise) const override {
    return -coeffs_.quadratic(Vector(0), noise);
  }

 private:
  const NoiseDrivenModel& model_;
  QuadCoeffs coeffs_;
  NoiseTwist twist_;
};

// Twisted proposal in transformed variables z = ℓ(s):
// z' ~ N(K m, K), K = (Σ⁻¹ + 2A)⁻¹, m = Σ⁻¹η − b − C ℓ(s_prev).
class DensityTransition final : public TransitionKernel {
 public:
  DensityTransition(const DensityDrivenModel& m, const QuadCoeffs* c) : model_(m), twisted_(c != nullptr) {
    if (c != nullptr) coeffs_ = *c;
  }

  struct Local {
    Vector z_prev;
    Vector eta;
    Matrix sigma;
    Eigen::LLT<Matrix> sigma_llt;
    Vector sigma_inv_eta;
    Eigen::LLT<Matrix> precision_llt;  // of Σ⁻¹ + 2A
    Vector m;
  };

  Local local(const ConstVectorRef& prev) const {
    const int d = model_.state_dim();
    Local l;
    l.z_prev.resize(d);
    model_.transform(prev, l.z_prev);
    l.eta.resize(d);
    model_.proposal_moments(prev, l.eta, l.sigma);
    l.sigma_llt.compute(l.sigma);
    if (l.sigma_llt.info() != Eigen::Success) throw InvalidInput("proposal covariance is not positive definite");
    if (twisted_) {
      const Matrix sigma_inv = l.sigma_llt.solve(Matrix::Identity(d, d));
      l.sigma_inv_eta = sigma_inv * l.eta;
      l.precision_llt.compute(linalg::symmetrize(sigma_inv + 2.0 * coeffs_.A));
      if (l.precision_llt.info() != Eigen::Success)
        throw PolicyInvariantError("twisted proposal: inverse proposal covariance + 2A is not positive definite");
      l.m = l.sigma_inv_eta - coeffs_.b - coeffs_.C * l.z_prev;
    }
    return l;
  }

  void sample(const ConstVectorRef& prev, Rng& rng, VectorRef state, VectorRef) const override {
    const int d = model_.state_dim();
    const Local l = local(prev);
    Vector xi(d);
    fill_normal(rng, xi);
    Vector z(d);
    if (twisted_) {
      const Vector mean = l.precision_llt.solve(l.m);
      z = mean + Matrix(l.precision_llt.matrixU()).triangularView<Eigen::Upper>().solve(xi);
    } else {
      z = l.eta + Matrix(l.sigma_llt.matrixL()) * xi;
    }
    model_.inverse_transform(z, state);
  }

  double log_expectation(const ConstVectorRef& prev) const override {
    if (!twisted_) return 0.0;
    const Local l = local(prev);
    const double half_logdet_k = -Matrix(l.precision_llt.matrixL()).diagonal().array().log().sum();
    const double half_logdet_sigma = Matrix(l.sigma_llt.matrixL()).diagonal().array().log().sum();
    const double quad_m = l.m.dot(l.precision_llt.solve(l.m));
    const double quad_eta = l.eta.dot(l.sigma_inv_eta);
    const double rest = l.z_prev.dot(coeffs_.D * l.z_prev) + l.z_prev.dot(coeffs_.e) + coeffs_.f;
    return half_logdet_k - half_logdet_sigma + 0.5 * quad_m - 0.5 * quad_eta - rest;
  }

  double log_policy(const ConstVectorRef& prev, const ConstVectorRef& state, const ConstVectorRef&) const override {
    if (!twisted_) return 0.0;
    const int d = model_.state_dim();
    Vector z(d), zp(d);
    model_.transform(prev, z);
    model_.transform(state, zp);
    return -coeffs_.quadratic(z, zp);
  }

  void policy_variables(const ConstVectorRef& prev, const ConstVectorRef& state, const ConstVectorRef&, VectorRef z,
                        VectorRef zp) const override {
    model_.transform(prev, z);
    model_.transform(state, zp);
  }

 private:
  const DensityDrivenModel& model_;
  bool twisted_;
  QuadCoeffs coeffs_;
};

// Dirac initial state: q_0(ψ_0) = ψ_0(s_0), a constant.
class DiracInitial final : public InitialKernel {
 public:
  DiracInitial(const DensityDrivenModel& m, double log_value) : model_(m), log_value_(log_value) {}
  void sample(Rng& rng, VectorRef state, VectorRef noise) const override {
    model_.sample_initial_state(rng, state, noise);
  }
  double log_expectation() const override { return log_value_; }
  double log_policy(const ConstVectorRef&, const ConstVectorRef&) const override { return log_value_; }

 private:
  const DensityDrivenModel& model_;
  double log_value_;
};

}  // namespace

void ModelDims::validate() const {
  if (state <= 0 || obs <= 0 || noise < 0) throw InvalidInput("model dimensions must be positive");
}

void StateSpaceModel::check_policy(const QuadraticPolicy& policy) const {
  const auto layout = policy_layout();
  if (policy.steps.empty()) throw PolicyInvariantError("policy has no steps");
  if (policy.steps[0].proposal_dim() != layout.initial_proposal_dim || policy.steps[0].conditioning_dim() != 0)
    throw PolicyInvariantError("policy step 0 has the wrong shape");
  for (std::size_t t = 1; t < policy.steps.size(); ++t) {
    const auto& c = policy.steps[t];
    if (c.proposal_dim() != layout.proposal_dim || c.conditioning_dim() != layout.conditioning_dim)
      throw PolicyInvariantError("policy step " + std::to_string(t) + " has the wrong shape");
    if (!c.A.allFinite() || !c.b.allFinite() || !c.C.allFinite() || !c.D.allFinite() || !c.e.allFinite() ||
        !std::isfinite(c.f))
      throw PolicyInvariantError("policy step " + std::to_string(t) + " has non-finite coefficients");
  }
}

// ---------------------------------------------------------------------------

NoiseDrivenModel::NoiseDrivenModel(Matrix state_matrix, Matrix noise_matrix, int obs_dim)
    : a_(std::move(state_matrix)), b_(std::move(noise_matrix)), obs_dim_(obs_dim) {
  if (a_.rows() == 0 || a_.rows() != a_.cols()) throw InvalidInput("state matrix must be square and non-empty");
  if (b_.rows() != a_.rows() || b_.cols() == 0) throw InvalidInput("noise matrix must have d rows");
  if (obs_dim_ <= 0) throw InvalidInput("observation dimension must be positive");
  linalg::require_finite(a_, "state matrix");
  linalg::require_finite(b_, "noise matrix");
}

ModelDims NoiseDrivenModel::dims() const {
  return {static_cast<int>(a_.rows()), static_cast<int>(b_.cols()), obs_dim_};
}

void NoiseDrivenModel::transition_map(const ConstVectorRef& prev, const ConstVectorRef& noise, VectorRef state) const {
  Vector c(a_.rows());
  residual(prev, noise, c);
  state = a_ * prev + b_ * noise + c;
}

void NoiseDrivenModel::sample_initial_state(Rng& rng, VectorRef state, VectorRef noise) const {
  fill_normal(rng, noise);
  initial_map(noise, state);
}

void NoiseDrivenModel::sample_transition(const ConstVectorRef& prev, Rng& rng, VectorRef state,
                                         VectorRef noise) const {
  fill_normal(rng, noise);
  transition_map(prev, noise, state);
}

PolicyLayout NoiseDrivenModel::policy_layout() const {
  const int dn = static_cast<int>(b_.cols());
  return {dn, dn, static_cast<int>(a_.rows())};
}

std::unique_ptr<InitialKernel> NoiseDrivenModel::initial_kernel(const QuadCoeffs* coeffs) const {
  if (is_untwisted(coeffs)) return std::make_unique<PlainInitial>(*this);
  return std::make_unique<NoiseInitial>(*this, *coeffs);
}

std::unique_ptr<TransitionKernel> NoiseDrivenModel::transition_kernel(const QuadCoeffs* coeffs) const {
  if (is_untwisted(coeffs)) return std::make_unique<PlainTransition>(*this);
  return std::make_unique<NoiseTransition>(*this, *coeffs);
}

QuadCoeffs NoiseDrivenModel::fit_transition_increment(const TransitionSupport& support,
                                                      const ConstVectorRef& targets,
                                                      const RidgeConfig& ridge) const {
  const Matrix linearized = a_ * support.prev + b_ * support.noises;
  const QuadCoeffs reduced = fit_logquadratic(Matrix(0, targets.size()), linearized, targets, ridge);
  return dim_reduce_lift(reduced, a_, b_);
}

QuadCoeffs NoiseDrivenModel::fit_initial_increment(const ConstMatrixRef&, const ConstMatrixRef& noises,
                                                   const ConstVectorRef& targets, const RidgeConfig& ridge) const {
  return fit_logquadratic(Matrix(0, targets.size()), noises, targets, ridge);
}

void NoiseDrivenModel::check_policy(const QuadraticPolicy& policy) const {
  StateSpaceModel::check_policy(policy);
  for (std::size_t t = 0; t < policy.steps.size(); ++t) {
    const auto& a = policy.steps[t].A;
    const Matrix precision = linalg::symmetrize(Matrix::Identity(a.rows(), a.cols()) + 2.0 * a);
    if (!linalg::is_positive_definite(precision))
      throw PolicyInvariantError("policy step " + std::to_string(t) + ": I + 2A is not positive definite");
  }
}

// ---------------------------------------------------------------------------

ModelDims DensityDrivenModel::dims() const { return {state_dim(), 0, obs_dim()}; }

double DensityDrivenModel::proposal_logdensity(const ConstVectorRef& prev, const ConstVectorRef& state) const {
  const int d = state_dim();
  Vector z(d), eta(d);
  Matrix sigma;
  transform(state, z);
  proposal_moments(prev, eta, sigma);
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw InvalidInput("proposal covariance is not positive definite");
  const Vector r = z - eta;
  const Matrix l = llt.matrixL();
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  return -0.5 * (d * kLog2Pi + logdet + r.dot(llt.solve(r))) + log_jacobian(state);
}

void DensityDrivenModel::sample_initial_state(Rng&, VectorRef state, VectorRef) const { state = initial_state(); }

double DensityDrivenModel::base_log_weight(const ConstVectorRef& prev, const ConstVectorRef& state) const {
  return transition_logdensity(prev, state) - proposal_logdensity(prev, state);
}

PolicyLayout DensityDrivenModel::policy_layout() const { return {0, state_dim(), state_dim()}; }

std::unique_ptr<InitialKernel> DensityDrivenModel::initial_kernel(const QuadCoeffs* coeffs) const {
  return std::make_unique<DiracInitial>(*this, coeffs == nullptr ? 0.0 : -coeffs->f);
}

std::unique_ptr<TransitionKernel> DensityDrivenModel::transition_kernel(const QuadCoeffs* coeffs) const {
  return std::make_unique<DensityTransition>(*this, is_untwisted(coeffs) ? nullptr : coeffs);
}

QuadCoeffs DensityDrivenModel::fit_transition_increment(const TransitionSupport& support,
                                                        const ConstVectorRef& targets,
                                                        const RidgeConfig& ridge) const {
  const int d = state_dim();
  const auto n = targets.size();
  Matrix z_prev(d, n), z_cur(d, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    transform(support.prev.col(k), z_prev.col(k));
    transform(support.states.col(k), z_cur.col(k));
  }
  return fit_logquadratic(z_prev, z_cur, targets, ridge);
}

QuadCoeffs DensityDrivenModel::fit_initial_increment(const ConstMatrixRef&, const ConstMatrixRef&,
                                                     const ConstVectorRef& targets, const RidgeConfig& ridge) const {
  return fit_logquadratic(Matrix(0, targets.size()), Matrix(0, targets.size()), targets, ridge);
}

// ---------------------------------------------------------------------------

double tempered_obs_logdensity(const StateSpaceModel& model, int t, const ConstVectorRef& prev,
                               const ConstVectorRef& state, const ConstVectorRef& y, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("tempered_obs_logdensity: lambda outside [0, 1]");
  if (!prev.allFinite() || !state.allFinite() || !y.allFinite())
    throw InvalidInput("tempered_obs_logdensity: non-finite state or observation");
  if (lambda < kTemperatureFloor) return 0.0;
  const double lg = model.obs_logdensity(t, prev, state, y);
  return lambda * lg;
}

Simulation simulate(const StateSpaceModel& model, int horizon, Rng& rng) {
  if (horizon < 1) throw InvalidInput("simulate: horizon must be at least 1");
  const auto dims = model.dims();
  dims.validate();
  Simulation out;
  out.trajectory.states.resize(dims.state, horizon + 1);
  out.trajectory.noises.resize(dims.noise, horizon + 1);
  out.observations.resize(dims.obs, horizon);
  Vector s(dims.state), e(dims.noise), y(dims.obs);
  model.sample_initial_state(rng, s, e);
  out.trajectory.states.col(0) = s;
  out.trajectory.noises.col(0) = e;
  for (int t = 1; t <= horizon; ++t) {
    const Vector prev = s;
    model.sample_transition(prev, rng, s, e);
    out.trajectory.states.col(t) = s;
    out.trajectory.noises.col(t) = e;
    model.sample_observation(t, prev, s, rng, y);
    out.observations.col(t - 1) = y;
  }
  return out;
}

std::vector<double> trajectory_log_obs(const StateSpaceModel& model, const Trajectory& path,
                                       const ConstMatrixRef& observations) {
  const int horizon = static_cast<int>(observations.cols());
  if (path.horizon() != horizon) throw InvalidInput("trajectory_log_obs: trajectory length mismatch");
  std::vector<double> out(horizon);
  for (int t = 1; t <= horizon; ++t)
    out[t - 1] = model.obs_logdensity(t, path.states.col(t - 1), path.states.col(t), observations.col(t - 1));
  return out;
}

}  // namespace acsmc
