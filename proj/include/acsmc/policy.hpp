#pragma once

#include <cmath>
#include <vector>

#include "json.hpp"

#include "acsmc/linalg.hpp"

namespace acsmc {

struct LinearGaussianSpec;

/// Coefficients of the log-quadratic function
///
///   Q(z, z') = z'ᵀ A z' + z'ᵀ b + z'ᵀ C z + zᵀ D z + zᵀ e + f
///
/// where z' (dimension m) is the variable the twisted proposal samples and
/// z (dimension n) is the conditioning variable. n == 0 gives the
/// initial-time form z'ᵀ A z' + z'ᵀ b + f.
struct QuadCoeffs {
  Matrix A;  // m × m, symmetric
  Vector b;  // m
  Matrix C;  // m × n
  Matrix D;  // n × n, symmetric
  Vector e;  // n
  double f = 0.0;

  static QuadCoeffs zero(int proposal_dim, int conditioning_dim);

  int proposal_dim() const { return static_cast<int>(b.size()); }
  int conditioning_dim() const { return static_cast<int>(e.size()); }

  /// Q(z, z'). Throws InvalidInput on dimension mismatch.
  double quadratic(const ConstVectorRef& z, const ConstVectorRef& zp) const;

  /// this += scale * other
  QuadCoeffs& add_scaled(const QuadCoeffs& other, double scale);

  bool is_zero() const;
  bool same_shape(const QuadCoeffs& other) const;
};

/// log ψ = −Q(z, z').
double eval_logpolicy(const QuadCoeffs& coeffs, const ConstVectorRef& z, const ConstVectorRef& zp);

/// Dimensions of the policy variables a model uses.
struct PolicyLayout {
  int initial_proposal_dim = 0;  // z' at t = 0 (no conditioning variable)
  int proposal_dim = 0;          // z' at t >= 1
  int conditioning_dim = 0;      // z at t >= 1
};

/// One QuadCoeffs per time step t = 0..T.
struct QuadraticPolicy {
  std::vector<QuadCoeffs> steps;

  /// ψ ≡ 1 for horizon T.
  static QuadraticPolicy constant_one(const PolicyLayout& layout, int horizon);

  int horizon() const { return static_cast<int>(steps.size()) - 1; }
  bool is_constant_one() const;
};

struct RidgeConfig {
  double shrinkage = 1e-6;  // ξ, applied as ξ·N on standardized coefficients
  bool standardize = true;
};

/// Ridge least-squares fit of log φ ≈ −Q(z, z') over support points.
/// `conditioning` is n × N, `proposal` is m × N (either may have zero rows).
QuadCoeffs fit_logquadratic(const ConstMatrixRef& conditioning, const ConstMatrixRef& proposal,
                            const ConstVectorRef& targets, const RidgeConfig& ridge);

/// Maps coefficients of Q₀(s̃) over the linearized state s̃ = A s + B ε onto
/// coefficients of Q(s, ε) such that both agree at every (s, ε).
QuadCoeffs dim_reduce_lift(const QuadCoeffs& reduced, const ConstMatrixRef& state_matrix,
                           const ConstMatrixRef& noise_matrix);

/// Lift at the initial time, where s̃₀ = B₀ ε₀.
QuadCoeffs dim_reduce_lift_initial(const QuadCoeffs& reduced, const ConstMatrixRef& noise_matrix);

inline constexpr double kDefaultAlpha = 0.4;
inline const double kLearningRateFloor = std::ldexp(1.0, -52);  // ζ

/// Largest κ ∈ (0, 1] keeping αI + A + κÃ positive definite.
/// Throws PolicyInvariantError when αI + A itself is not positive definite.
double learning_rate(const ConstMatrixRef& current_A, const ConstMatrixRef& increment_A, double alpha);

/// current + κ·increment with κ from `learning_rate`.
QuadCoeffs constrained_refine_step(const QuadCoeffs& current, const QuadCoeffs& increment, double alpha,
                                   double* kappa = nullptr);

struct RefinedPolicy {
  QuadraticPolicy policy;
  std::vector<double> learning_rates;  // κ_t, t = 0..T
};

RefinedPolicy constrained_refine(const QuadraticPolicy& current, const QuadraticPolicy& increment,
                                 double alpha = kDefaultAlpha);

/// Exact optimal policy of a tempered linear-Gaussian model. `reduced`
/// holds (Ã_t, b̃_t, c̃_t) over the state s_t; `lifted` is the same policy
/// over (s_{t−1}, ε_t) as consumed by controlled SMC.
struct LqgPolicy {
  std::vector<QuadCoeffs> reduced;
  QuadraticPolicy lifted;
};

LqgPolicy optimal_policy_lgssm(const LinearGaussianSpec& spec, const ConstMatrixRef& observations,
                               double lambda);

nlohmann::json policy_to_json(const QuadraticPolicy& policy);
QuadraticPolicy policy_from_json(const nlohmann::json& j);

}  // namespace acsmc
