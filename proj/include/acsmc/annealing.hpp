#pragma once

#include <string>
#include <vector>

#include "acsmc/adp.hpp"
#include "acsmc/model.hpp"
#include "acsmc/policy.hpp"
#include "acsmc/smc.hpp"

namespace acsmc {

/// λ_0 = 0 < λ_1 < … ≤ 1.
struct TemperatureLadder {
  enum class Origin { Fixed, Adaptive };

  std::vector<double> values{0.0};
  Origin origin = Origin::Fixed;

  /// `count` equally spaced temperatures from 0 to 1 inclusive (count >= 2).
  static TemperatureLadder uniform(int count);

  /// Throws InvalidInput unless strictly increasing within [0, 1] from 0.
  void validate() const;
  double final_temperature() const { return values.back(); }
};

struct StageDiagnostics {
  int stage = 0;
  double lambda = 0.0;
  double log_likelihood = 0.0;
  double min_ess = 0.0;
  double min_learning_rate = 1.0;
  int clipped_targets = 0;
};

struct AcsmcResult {
  QuadraticPolicy policy;
  SmcOutput output;
  std::vector<StageDiagnostics> stages;
};

struct AcsmcOptions {
  RidgeConfig ridge;
  double alpha = kDefaultAlpha;
};

/// Annealed controlled SMC along a fixed ladder. Failures at a stage surface
/// as StageFailure carrying the stage index.
AcsmcResult run_acsmc(const StateSpaceModel& model, const ConstMatrixRef& observations,
                      const TemperatureLadder& ladder, int particles, Rng& rng,
                      const AcsmcOptions& options = {});

/// Conditional controlled SMC kernel step (reference held in slot 0).
inline SmcOutput run_conditional_csmc(const StateSpaceModel& model, const ConstMatrixRef& observations,
                                      double lambda, const QuadraticPolicy* policy, int particles,
                                      const Trajectory& reference, Rng& rng) {
  return run_conditional_smc(model, observations, lambda, policy, particles, reference, rng);
}

}  // namespace acsmc
