#include <cmath>
#include <string>

#include "acsmc/error.hpp"
#include "acsmc/models.hpp"

namespace acsmc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

GaussianObservation::GaussianObservation(Vector offset, Matrix loading, Matrix cov)
    : offset_(std::move(offset)), loading_(std::move(loading)), cov_(std::move(cov)) {
  Eigen::LLT<Matrix> llt(cov_);
  if (llt.info() != Eigen::Success) throw DecompositionError("observation covariance is not positive definite");
  chol_ = llt.matrixL();
  log_norm_ = -0.5 * (static_cast<double>(offset_.size()) * kLog2Pi + 2.0 * chol_.diagonal().array().log().sum());
}

double GaussianObservation::logdensity(const ConstVectorRef& state, const ConstVectorRef& y) const {
  const Vector r = y - offset_ - loading_ * state;
  const Vector w = chol_.triangularView<Eigen::Lower>().solve(r);
  return log_norm_ - 0.5 * w.squaredNorm();
}

void GaussianObservation::sample(const ConstVectorRef& state, Rng& rng, VectorRef y) const {
  Vector z(offset_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  y = offset_ + loading_ * state + chol_ * z;
}

// ---------------------------------------------------------------------------

LinearGaussianModel::LinearGaussianModel(LinearGaussianSpec spec)
    : NoiseDrivenModel(spec.A, spec.B, spec.obs_dim()), spec_(std::move(spec)) {
  spec_.validate();
  b0_ = spec_.initial_noise_matrix();
  obs_ = GaussianObservation(spec_.obs_offset, spec_.obs_loading, spec_.obs_cov);
}

void LinearGaussianModel::initial_map(const ConstVectorRef& noise, VectorRef state) const { state = b0_ * noise; }

double LinearGaussianModel::obs_logdensity(int, const ConstVectorRef&, const ConstVectorRef& state,
                                           const ConstVectorRef& y) const {
  return obs_.logdensity(state, y);
}

void LinearGaussianModel::sample_observation(int, const ConstVectorRef&, const ConstVectorRef& state, Rng& rng,
                                             VectorRef y) const {
  obs_.sample(state, rng, y);
}

// ---------------------------------------------------------------------------

void QuadraticSsmSpec::validate() const {
  const auto dx = L1.rows();
  const auto dz = rho.rows();
  if (dx == 0 || L1.cols() != dx) throw InvalidInput("quadratic spec: L1 must be square and non-empty");
  if (dz == 0 || rho.cols() != dz) throw InvalidInput("quadratic spec: rho must be square and non-empty");
  if (L2.rows() != dx || L2.cols() != dz) throw InvalidInput("quadratic spec: L2 must be d_x × d_z");
  if (sigma.rows() != dz || sigma.cols() != dz) throw InvalidInput("quadratic spec: sigma must be d_z × d_z");
  if (constant.size() != dx) throw InvalidInput("quadratic spec: constant must have d_x entries");
  const auto d = dx + dz;
  if (!quad.empty()) {
    if (static_cast<Eigen::Index>(quad.size()) != dx)
      throw InvalidInput("quadratic spec: need one quadratic matrix per endogenous variable");
    for (const auto& q : quad)
      if (q.rows() != d || q.cols() != d) throw InvalidInput("quadratic spec: quadratic matrices must be d × d");
  }
  if (obs_loading.cols() != d) throw InvalidInput("quadratic spec: observation loading must have d columns");
}

Matrix QuadraticSsmSpec::state_matrix() const {
  const auto dx = L1.rows();
  const auto dz = rho.rows();
  Matrix a = Matrix::Zero(dx + dz, dx + dz);
  a.topLeftCorner(dx, dx) = L1;
  a.topRightCorner(dx, dz) = L2 * rho;
  a.bottomRightCorner(dz, dz) = rho;
  return a;
}

Matrix QuadraticSsmSpec::noise_matrix() const {
  const auto dx = L1.rows();
  const auto dz = rho.rows();
  Matrix b(dx + dz, dz);
  b.topRows(dx) = L2 * sigma;
  b.bottomRows(dz) = sigma;
  return b;
}

LinearGaussianSpec QuadraticSsmSpec::linear_part() const {
  validate();
  LinearGaussianSpec s;
  s.A = state_matrix();
  s.B = noise_matrix();
  s.obs_offset = obs_offset;
  s.obs_loading = obs_loading;
  s.obs_cov = obs_cov;
  return s;
}

LinearGaussianModel build_lgssm(const QuadraticSsmSpec& spec) { return LinearGaussianModel(spec.linear_part()); }

QuadraticSsm::QuadraticSsm(QuadraticSsmSpec spec)
    : NoiseDrivenModel((spec.validate(), spec.state_matrix()), spec.noise_matrix(),
                       static_cast<int>(spec.obs_offset.size())),
      spec_(std::move(spec)) {
  spec_.linear_part().validate();
  obs_ = GaussianObservation(spec_.obs_offset, spec_.obs_loading, spec_.obs_cov);
}

void QuadraticSsm::quadratic_block(const ConstVectorRef& u, VectorRef out) const {
  const int dx = spec_.endogenous_dim();
  for (int i = 0; i < dx; ++i) out(i) = spec_.constant(i) + (spec_.quad.empty() ? 0.0 : u.dot(spec_.quad[i] * u));
}

void QuadraticSsm::residual(const ConstVectorRef& prev, const ConstVectorRef& noise, VectorRef out) const {
  const int dx = spec_.endogenous_dim();
  const int dz = spec_.exogenous_dim();
  Vector u(dx + dz);
  u.head(dx) = prev.head(dx);
  u.tail(dz) = spec_.rho * prev.tail(dz) + spec_.sigma * noise;
  out.setZero();
  quadratic_block(u, out.head(dx));
}

void QuadraticSsm::initial_map(const ConstVectorRef& noise, VectorRef state) const {
  const int dx = spec_.endogenous_dim();
  const int dz = spec_.exogenous_dim();
  Vector u = Vector::Zero(dx + dz);
  u.tail(dz) = spec_.sigma * noise;
  Vector r = Vector::Zero(dx + dz);
  quadratic_block(u, r.head(dx));
  state = b_ * noise + r;
}

double QuadraticSsm::obs_logdensity(int, const ConstVectorRef&, const ConstVectorRef& state,
                                    const ConstVectorRef& y) const {
  return obs_.logdensity(state, y);
}

void QuadraticSsm::sample_observation(int, const ConstVectorRef&, const ConstVectorRef& state, Rng& rng,
                                      VectorRef y) const {
  obs_.sample(state, rng, y);
}

QuadraticSsm build_quadratic_ssm(const QuadraticSsmSpec& spec) { return QuadraticSsm(spec); }

}  // namespace acsmc
