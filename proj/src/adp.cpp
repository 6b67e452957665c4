#include "acsmc/adp.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "acsmc/error.hpp"
#include "acsmc/kalman.hpp"

namespace acsmc {

namespace {

double checked_target(double v, int t, int n, int& clipped) {
  if (!std::isfinite(v))
    throw NonFiniteWeight(t, n, "adp: non-finite target at t = " + std::to_string(t) + ", particle " + std::to_string(n));
  if (v > kTargetClip) {
    ++clipped;
    return kTargetClip;
  }
  if (v < -kTargetClip) {
    ++clipped;
    return -kTargetClip;
  }
  return v;
}

}  // namespace

double conditional_expectation_logpolicy(const StateSpaceModel& model, const QuadCoeffs& coeffs,
                                         const ConstVectorRef& prev) {
  return model.transition_kernel(&coeffs)->log_expectation(prev);
}

AdpResult adp_backward_pass(const StateSpaceModel& model, const ConstMatrixRef& observations, double lambda_prev,
                            double lambda_new, const QuadraticPolicy& current, const SmcOutput& output,
                            const RidgeConfig& ridge, double alpha) {
  if (!(lambda_prev >= 0.0 && lambda_new <= 1.0 && lambda_prev <= lambda_new))
    throw InvalidInput("adp: temperatures must satisfy 0 <= lambda_prev <= lambda_new <= 1");
  const ParticleSystem& ps = output.particles;
  const int horizon = ps.horizon();
  if (horizon != observations.cols() || current.horizon() != horizon)
    throw InvalidInput("adp: policy, particle system and observations disagree on the horizon");
  model.check_policy(current);
  const int n = ps.size();
  const bool tempered = lambda_new >= kTemperatureFloor;

  AdpResult out;
  out.increment.steps.resize(horizon + 1);
  out.refined.steps.resize(horizon + 1);
  out.learning_rates.assign(horizon + 1, 1.0);

  std::unique_ptr<TransitionKernel> refined_next;
  Vector targets(n);
  for (int t = horizon; t >= 1; --t) {
    const auto kernel = model.transition_kernel(&current.steps[t]);
    const auto& anc = ps.ancestors[t];
    TransitionSupport support;
    support.prev.resize(ps.states[t - 1].rows(), n);
    for (int k = 0; k < n; ++k) support.prev.col(k) = ps.states[t - 1].col(anc[k]);
    support.states = ps.states[t];
    support.noises = ps.noises[t];
    for (int k = 0; k < n; ++k) {
      const auto prev = support.prev.col(k);
      const auto s = support.states.col(k);
      double v = tempered ? lambda_new * ps.log_obs[t](k) : 0.0;
      v += model.base_log_weight(prev, s);
      if (refined_next) v += refined_next->log_expectation(s);
      v -= kernel->log_policy(prev, s, support.noises.col(k));
      targets(k) = checked_target(v, t, k, out.clipped_targets);
    }
    out.increment.steps[t] = model.fit_transition_increment(support, targets, ridge);
    out.refined.steps[t] =
        constrained_refine_step(current.steps[t], out.increment.steps[t], alpha, &out.learning_rates[t]);
    refined_next = model.transition_kernel(&out.refined.steps[t]);
  }

  const auto initial = model.initial_kernel(&current.steps[0]);
  const double log_q0 = initial->log_expectation();
  for (int k = 0; k < n; ++k) {
    const auto s = ps.states[0].col(k);
    double v = log_q0 + refined_next->log_expectation(s) - initial->log_policy(s, ps.noises[0].col(k));
    targets(k) = checked_target(v, 0, k, out.clipped_targets);
  }
  out.increment.steps[0] = model.fit_initial_increment(ps.states[0], ps.noises[0], targets, ridge);
  out.refined.steps[0] =
      constrained_refine_step(current.steps[0], out.increment.steps[0], alpha, &out.learning_rates[0]);
  return out;
}

}  // namespace acsmc
