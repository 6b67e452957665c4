#pragma once

#include <vector>

#include "acsmc/linalg.hpp"
#include "acsmc/rng.hpp"

namespace acsmc {

/// s_0 = B₀ ε_0,  s_t = A s_{t−1} + B ε_t,  y_t ~ N(d + E s_t, F).
struct LinearGaussianSpec {
  Matrix A;           // d × d
  Matrix B;           // d × d_noise
  Matrix B0;          // d × d_noise; empty means B
  Vector obs_offset;  // d_y
  Matrix obs_loading; // d_y × d
  Matrix obs_cov;     // d_y × d_y, SPD

  int state_dim() const { return static_cast<int>(A.rows()); }
  int noise_dim() const { return static_cast<int>(B.cols()); }
  int obs_dim() const { return static_cast<int>(obs_offset.size()); }
  const Matrix& initial_noise_matrix() const { return B0.size() == 0 ? B : B0; }

  /// Throws InvalidInput on inconsistent shapes, DecompositionError when F is not SPD.
  void validate() const;
};

/// Inverse temperatures below this are treated as zero.
inline constexpr double kTemperatureFloor = 1e-12;

struct KalmanResult {
  double loglik = 0.0;
  std::vector<Vector> filtered_means;      // t = 0..T
  std::vector<Matrix> filtered_covs;
  std::vector<Vector> predicted_means;     // t = 0..T (t = 0 is the prior)
  std::vector<Matrix> predicted_covs;
};

/// Tempered Kalman filter: observation updates use F/λ and each step adds the
/// constant relating N(y; μ, F)^λ to N(y; μ, F/λ).
KalmanResult kalman_filter(const LinearGaussianSpec& spec, const ConstMatrixRef& observations, double lambda);

/// log p(y_{1:T} | λ). Observations are d_y × T.
double kalman_loglik(const LinearGaussianSpec& spec, const ConstMatrixRef& observations, double lambda);

struct SmootherMarginals {
  std::vector<Vector> means;  // t = 0..T
  std::vector<Matrix> covs;
};

/// Rauch–Tung–Striebel marginals of p(s_t | y_{1:T}) at λ = 1.
SmootherMarginals kalman_smoother_marginals(const LinearGaussianSpec& spec, const ConstMatrixRef& observations);

/// One exact draw of s_{0:T} from p(s_{0:T} | y_{1:T}) by backward sampling.
Matrix kalman_smoother_draw(const LinearGaussianSpec& spec, const ConstMatrixRef& observations, Rng& rng);

}  // namespace acsmc
