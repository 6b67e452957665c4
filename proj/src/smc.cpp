#include "acsmc/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "acsmc/error.hpp"
#include "acsmc/kalman.hpp"

namespace acsmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

int draw_index(const std::vector<double>& cumulative, double u) {
  const double total = cumulative.back();
  const double target = u * total;
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  if (it == cumulative.end()) {
    // u·total rounded up to total: take the last index with positive mass.
    it = std::lower_bound(cumulative.begin(), cumulative.end(), total);
  }
  return static_cast<int>(it - cumulative.begin());
}

std::vector<double> cumulative_of(const ConstVectorRef& weights) {
  std::vector<double> cum(static_cast<std::size_t>(weights.size()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!(weights(i) >= 0.0) || !std::isfinite(weights(i))) throw InvalidInput("resampling: invalid weight");
    acc += weights(i);
    cum[static_cast<std::size_t>(i)] = acc;
  }
  if (!(acc > 0.0)) throw DegenerateWeights(-1, "resampling: all weights are zero");
  return cum;
}

SmcOutput run_engine(const StateSpaceModel& model, const ConstMatrixRef& observations, double lambda,
                     const QuadraticPolicy* policy, int n_particles, const Trajectory* reference, Rng& rng) {
  const auto dims = model.dims();
  dims.validate();
  if (n_particles < 1) throw InvalidInput("smc: particle count must be at least 1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("smc: lambda outside [0, 1]");
  if (observations.rows() != dims.obs) throw InvalidInput("smc: observation dimension mismatch");
  const int horizon = static_cast<int>(observations.cols());
  if (horizon < 1) throw InvalidInput("smc: at least one observation is required");
  if (policy != nullptr) {
    if (policy->horizon() != horizon) throw InvalidInput("smc: policy horizon does not match observations");
    model.check_policy(*policy);
  }
  if (reference != nullptr) {
    if (reference->states.rows() != dims.state || reference->horizon() != horizon)
      throw InvalidInput("conditional smc: reference trajectory has the wrong shape");
    if (reference->noises.rows() != dims.noise || reference->noises.cols() != horizon + 1)
      throw InvalidInput("conditional smc: reference noises have the wrong shape");
  }
  const bool tempered = lambda >= kTemperatureFloor;

  std::vector<std::unique_ptr<TransitionKernel>> kernels(horizon + 1);
  const auto initial = model.initial_kernel(policy != nullptr ? &policy->steps[0] : nullptr);
  for (int t = 1; t <= horizon; ++t) kernels[t] = model.transition_kernel(policy != nullptr ? &policy->steps[t] : nullptr);

  SmcOutput out;
  ParticleSystem& ps = out.particles;
  ps.states.assign(horizon + 1, Matrix(dims.state, n_particles));
  ps.noises.assign(horizon + 1, Matrix(dims.noise, n_particles));
  ps.ancestors.assign(horizon + 1, {});
  ps.log_weights.assign(horizon + 1, Vector(n_particles));
  ps.weights.assign(horizon + 1, Vector(n_particles));
  ps.log_obs.assign(horizon + 1, Vector());
  ps.log_mean_weights.assign(horizon + 1, 0.0);
  ps.ess.assign(horizon + 1, 0.0);
  const double log_n = std::log(static_cast<double>(n_particles));

  auto finish_step = [&](int t) {
    const double lse = normalize_log_weights(ps.log_weights[t], t, ps.weights[t]);
    ps.log_mean_weights[t] = lse - log_n;
    ps.ess[t] = ess(ps.weights[t]);
    out.log_likelihood += ps.log_mean_weights[t];
  };

  // t = 0
  {
    Matrix& s = ps.states[0];
    Matrix& e = ps.noises[0];
    const double log_q0 = initial->log_expectation();
    for (int n = 0; n < n_particles; ++n) {
      if (reference != nullptr && n == 0) {
        s.col(0) = reference->states.col(0);
        e.col(0) = reference->noises.col(0);
      } else {
        initial->sample(rng, s.col(n), e.col(n));
      }
      ps.log_weights[0](n) = log_q0 + kernels[1]->log_expectation(s.col(n)) - initial->log_policy(s.col(n), e.col(n));
    }
    if (reference != nullptr && ps.log_weights[0](0) == kNegInf)
      throw InvalidInput("conditional smc: reference path has zero weight at t = 0");
    finish_step(0);
  }

  for (int t = 1; t <= horizon; ++t) {
    auto& anc = ps.ancestors[t];
    anc = multinomial_resample(ps.weights[t - 1], n_particles, rng);
    if (reference != nullptr) anc[0] = 0;
    const Matrix& prev_states = ps.states[t - 1];
    Matrix& s = ps.states[t];
    Matrix& e = ps.noises[t];
    Vector& lg = ps.log_obs[t];
    lg.resize(n_particles);
    const auto y = observations.col(t - 1);
    for (int n = 0; n < n_particles; ++n) {
      const auto prev = prev_states.col(anc[n]);
      if (reference != nullptr && n == 0) {
        s.col(0) = reference->states.col(t);
        e.col(0) = reference->noises.col(t);
      } else {
        kernels[t]->sample(prev, rng, s.col(n), e.col(n));
      }
      if (!s.col(n).allFinite()) throw NonFiniteWeight(t, n, "smc: non-finite state at t = " + std::to_string(t));
      lg(n) = model.obs_logdensity(t, prev, s.col(n), y);
      double lw = tempered ? lambda * lg(n) : 0.0;
      lw += model.base_log_weight(prev, s.col(n));
      if (t < horizon) lw += kernels[t + 1]->log_expectation(s.col(n));
      lw -= kernels[t]->log_policy(prev, s.col(n), e.col(n));
      ps.log_weights[t](n) = lw;
    }
    if (reference != nullptr && ps.log_weights[t](0) == kNegInf)
      throw InvalidInput("conditional smc: reference path has zero weight at t = " + std::to_string(t));
    finish_step(t);
  }

  const auto cum = cumulative_of(ps.weights[horizon]);
  const int terminal = draw_index(cum, rng.uniform());
  out.lineage = trace_lineage(ps.ancestors, terminal);
  out.trajectory.states.resize(dims.state, horizon + 1);
  out.trajectory.noises.resize(dims.noise, horizon + 1);
  out.path_log_obs.resize(horizon);
  for (int t = 0; t <= horizon; ++t) {
    out.trajectory.states.col(t) = ps.states[t].col(out.lineage[t]);
    out.trajectory.noises.col(t) = ps.noises[t].col(out.lineage[t]);
    if (t >= 1) out.path_log_obs[t - 1] = ps.log_obs[t](out.lineage[t]);
  }
  return out;
}

}  // namespace

double SmcOutput::min_ess() const {
  if (particles.ess.empty()) return 0.0;
  return *std::min_element(particles.ess.begin(), particles.ess.end());
}

double log_sum_exp(const ConstVectorRef& x) {
  if (x.size() == 0) return kNegInf;
  const double m = x.maxCoeff();
  if (m == kNegInf) return kNegInf;
  if (!std::isfinite(m)) return m;
  return m + std::log((x.array() - m).exp().sum());
}

double ess(const ConstVectorRef& weights) {
  if (weights.size() == 0) throw InvalidInput("ess: empty weights");
  const double total = weights.sum();
  if (!(total > 0.0)) throw DegenerateWeights(-1, "ess: all weights are zero");
  return total * total / weights.squaredNorm();
}

double normalize_log_weights(const ConstVectorRef& log_weights, int time, Vector& weights) {
  for (Eigen::Index n = 0; n < log_weights.size(); ++n) {
    const double v = log_weights(n);
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw NonFiniteWeight(time, static_cast<int>(n),
                            "non-finite weight at t = " + std::to_string(time) + ", particle " + std::to_string(n));
  }
  const double lse = log_sum_exp(log_weights);
  if (lse == kNegInf) throw DegenerateWeights(time, "all weights are zero at t = " + std::to_string(time));
  weights = (log_weights.array() - lse).exp();
  weights /= weights.sum();
  return lse;
}

std::vector<int> multinomial_resample(const ConstVectorRef& weights, int count, Rng& rng) {
  if (count < 0) throw InvalidInput("multinomial_resample: negative count");
  const auto cum = cumulative_of(weights);
  std::vector<int> out(static_cast<std::size_t>(count));
  for (auto& a : out) a = draw_index(cum, rng.uniform());
  return out;
}

std::vector<int> trace_lineage(const std::vector<std::vector<int>>& ancestors, int terminal) {
  if (ancestors.empty()) throw InvalidInput("trace_lineage: empty ancestor table");
  const int horizon = static_cast<int>(ancestors.size()) - 1;
  std::vector<int> path(horizon + 1);
  path[horizon] = terminal;
  for (int t = horizon; t >= 1; --t) {
    const auto& a = ancestors[t];
    if (path[t] < 0 || path[t] >= static_cast<int>(a.size()))
      throw InvalidInput("trace_lineage: index out of range at t = " + std::to_string(t));
    path[t - 1] = a[path[t]];
  }
  if (horizon >= 1 && (path[0] < 0 || path[0] >= static_cast<int>(ancestors[1].size())))
    throw InvalidInput("trace_lineage: ancestor index out of range");
  return path;
}

SmcOutput run_bpf(const StateSpaceModel& model, const ConstMatrixRef& observations, double lambda, int particles,
                  Rng& rng) {
  return run_engine(model, observations, lambda, nullptr, particles, nullptr, rng);
}

SmcOutput run_controlled_smc(const StateSpaceModel& model, const ConstMatrixRef& observations, double lambda,
                             const QuadraticPolicy* policy, int particles, Rng& rng) {
  return run_engine(model, observations, lambda, policy, particles, nullptr, rng);
}

SmcOutput run_conditional_smc(const StateSpaceModel& model, const ConstMatrixRef& observations, double lambda,
                              const QuadraticPolicy* policy, int particles, const Trajectory& reference, Rng& rng) {
  return run_engine(model, observations, lambda, policy, particles, &reference, rng);
}

}  // namespace acsmc
