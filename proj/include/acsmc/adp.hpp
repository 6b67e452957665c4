#pragma once

#include <vector>

#include "acsmc/model.hpp"
#include "acsmc/policy.hpp"
#include "acsmc/smc.hpp"

namespace acsmc {

/// Targets are clipped to ±kTargetClip before regression.
inline constexpr double kTargetClip = 1e6;

struct AdpResult {
  QuadraticPolicy increment;   // fitted φ
  QuadraticPolicy refined;     // ψ·φ with the learning-rate guard applied
  std::vector<double> learning_rates;
  int clipped_targets = 0;
};

/// log q_{t}(ψ_t | s_{t−1}) for one policy step.
double conditional_expectation_logpolicy(const StateSpaceModel& model, const QuadCoeffs& coeffs,
                                         const ConstVectorRef& prev);

/// One backward regression pass over `output`, produced by controlled SMC
/// under `current` at `lambda_prev`, refining the policy towards the optimal
/// one at `lambda_new`. Each fitted step t + 1 is refined before the targets
/// at t are built, so the expectations use the policy that will actually run.
AdpResult adp_backward_pass(const StateSpaceModel& model, const ConstMatrixRef& observations, double lambda_prev,
                            double lambda_new, const QuadraticPolicy& current, const SmcOutput& output,
                            const RidgeConfig& ridge, double alpha = kDefaultAlpha);

}  // namespace acsmc
