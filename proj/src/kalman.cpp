#include "acsmc/kalman.hpp"

#include <cmath>

#include "acsmc/error.hpp"

namespace acsmc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Matrix pseudo_inverse(const ConstMatrixRef& m) {
  return Eigen::CompleteOrthogonalDecomposition<Matrix>(m).pseudoInverse();
}

}  // namespace

void LinearGaussianSpec::validate() const {
  const auto d = A.rows();
  if (d == 0 || A.cols() != d) throw InvalidInput("linear-gaussian spec: A must be square and non-empty");
  if (B.rows() != d || B.cols() == 0) throw InvalidInput("linear-gaussian spec: B must have d rows");
  if (B0.size() != 0 && (B0.rows() != d || B0.cols() != B.cols()))
    throw InvalidInput("linear-gaussian spec: initial noise matrix must match B");
  const auto dy = obs_offset.size();
  if (dy == 0) throw InvalidInput("linear-gaussian spec: empty observation offset");
  if (obs_loading.rows() != dy || obs_loading.cols() != d)
    throw InvalidInput("linear-gaussian spec: observation loading must be d_y × d");
  if (obs_cov.rows() != dy || obs_cov.cols() != dy)
    throw InvalidInput("linear-gaussian spec: observation covariance must be d_y × d_y");
  linalg::require_finite(A, "A");
  linalg::require_finite(B, "B");
  linalg::require_finite(obs_loading, "E");
  linalg::require_finite(obs_cov, "F");
  linalg::require_finite(obs_offset, "d");
  if ((obs_cov - obs_cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, linalg::max_abs(obs_cov)))
    throw DecompositionError("linear-gaussian spec: observation covariance is not symmetric");
  if (!linalg::is_positive_definite(obs_cov))
    throw DecompositionError("linear-gaussian spec: observation covariance is not positive definite");
}

KalmanResult kalman_filter(const LinearGaussianSpec& spec, const ConstMatrixRef& observations, double lambda) {
  spec.validate();
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("kalman_filter: lambda outside [0, 1]");
  if (observations.rows() != spec.obs_dim()) throw InvalidInput("kalman_filter: observation dimension mismatch");
  linalg::require_finite(observations, "observations");

  const int d = spec.state_dim();
  const int dy = spec.obs_dim();
  const int horizon = static_cast<int>(observations.cols());
  const bool tempered = lambda >= kTemperatureFloor;

  KalmanResult out;
  out.filtered_means.reserve(horizon + 1);
  out.filtered_covs.reserve(horizon + 1);

  const Matrix& b0 = spec.initial_noise_matrix();
  Vector m = Vector::Zero(d);
  Matrix p = b0 * b0.transpose();
  out.predicted_means.push_back(m);
  out.predicted_covs.push_back(p);
  out.filtered_means.push_back(m);
  out.filtered_covs.push_back(p);

  const Matrix q = spec.B * spec.B.transpose();
  const Matrix& e = spec.obs_loading;
  Matrix f_lambda;
  double step_constant = 0.0;
  if (tempered) {
    f_lambda = spec.obs_cov / lambda;
    step_constant = (1.0 - lambda) * 0.5 * dy * kLog2Pi + 0.5 * (1.0 - lambda) * linalg::logdet_spd(spec.obs_cov) -
                    0.5 * dy * std::log(lambda);
  }
  const Matrix eye = Matrix::Identity(d, d);

  for (int t = 1; t <= horizon; ++t) {
    m = spec.A * m;
    p = linalg::symmetrize(spec.A * p * spec.A.transpose() + q);
    out.predicted_means.push_back(m);
    out.predicted_covs.push_back(p);
    if (tempered) {
      const Vector r = observations.col(t - 1) - spec.obs_offset - e * m;
      const Matrix s = linalg::symmetrize(e * p * e.transpose() + f_lambda);
      Eigen::LLT<Matrix> llt(s);
      if (llt.info() != Eigen::Success) throw DecompositionError("kalman_filter: innovation covariance not SPD");
      const Matrix l = llt.matrixL();
      const double logdet = 2.0 * l.diagonal().array().log().sum();
      out.loglik += -0.5 * (dy * kLog2Pi + logdet + r.dot(llt.solve(r))) + step_constant;
      const Matrix gain = llt.solve(e * p).transpose();  // P Eᵀ S⁻¹
      m += gain * r;
      const Matrix i_ke = eye - gain * e;
      p = linalg::symmetrize(i_ke * p * i_ke.transpose() + gain * f_lambda * gain.transpose());
    }
    out.filtered_means.push_back(m);
    out.filtered_covs.push_back(p);
  }
  if (!tempered) out.loglik = 0.0;
  return out;
}

double kalman_loglik(const LinearGaussianSpec& spec, const ConstMatrixRef& observations, double lambda) {
  return kalman_filter(spec, observations, lambda).loglik;
}

SmootherMarginals kalman_smoother_marginals(const LinearGaussianSpec& spec, const ConstMatrixRef& observations) {
  const auto kf = kalman_filter(spec, observations, 1.0);
  const int horizon = static_cast<int>(observations.cols());
  SmootherMarginals out;
  out.means.resize(horizon + 1);
  out.covs.resize(horizon + 1);
  out.means[horizon] = kf.filtered_means[horizon];
  out.covs[horizon] = kf.filtered_covs[horizon];
  for (int t = horizon - 1; t >= 0; --t) {
    const Matrix g = kf.filtered_covs[t] * spec.A.transpose() * pseudo_inverse(kf.predicted_covs[t + 1]);
    out.means[t] = kf.filtered_means[t] + g * (out.means[t + 1] - kf.predicted_means[t + 1]);
    out.covs[t] = linalg::symmetrize(kf.filtered_covs[t] +
                                     g * (out.covs[t + 1] - kf.predicted_covs[t + 1]) * g.transpose());
  }
  return out;
}

Matrix kalman_smoother_draw(const LinearGaussianSpec& spec, const ConstMatrixRef& observations, Rng& rng) {
  const auto kf = kalman_filter(spec, observations, 1.0);
  const int horizon = static_cast<int>(observations.cols());
  const int d = spec.state_dim();
  auto draw = [&](const Vector& mean, const Matrix& cov) {
    Vector z(d);
    for (int i = 0; i < d; ++i) z(i) = rng.normal();
    return Vector(mean + linalg::sqrt_psd(cov) * z);
  };
  Matrix path(d, horizon + 1);
  path.col(horizon) = draw(kf.filtered_means[horizon], kf.filtered_covs[horizon]);
  for (int t = horizon - 1; t >= 0; --t) {
    const Matrix& pf = kf.filtered_covs[t];
    const Matrix g = pf * spec.A.transpose() * pseudo_inverse(kf.predicted_covs[t + 1]);
    const Vector mean = kf.filtered_means[t] + g * (path.col(t + 1) - kf.predicted_means[t + 1]);
    const Matrix cov = linalg::symmetrize(pf - g * spec.A * pf);
    path.col(t) = draw(mean, cov);
  }
  return path;
}

}  // namespace acsmc
