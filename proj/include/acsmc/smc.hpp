#pragma once

#include <vector>

#include "acsmc/linalg.hpp"
#include "acsmc/model.hpp"
#include "acsmc/policy.hpp"
#include "acsmc/rng.hpp"

namespace acsmc {

/// Dense record of one SMC pass. Index t runs over 0..T.
struct ParticleSystem {
  std::vector<Matrix> states;             // d × N per t
  std::vector<Matrix> noises;             // d_noise × N per t
  std::vector<std::vector<int>> ancestors;  // [t][n]: index at t−1 of the parent of particle n at t; [0] empty
  std::vector<Vector> log_weights;        // log w_t^ψ
  std::vector<Vector> weights;            // normalized W_t
  std::vector<Vector> log_obs;            // log g(y_t | s_{t−1}, s_t); [0] empty
  std::vector<double> log_mean_weights;   // logsumexp(log w_t) − log N
  std::vector<double> ess;

  int horizon() const { return static_cast<int>(states.size()) - 1; }
  int size() const { return states.empty() ? 0 : static_cast<int>(states[0].cols()); }
};

struct SmcOutput {
  ParticleSystem particles;
  double log_likelihood = 0.0;
  std::vector<int> lineage;      // l_{0:T}
  Trajectory trajectory;         // particles along the lineage
  std::vector<double> path_log_obs;  // log g along the lineage, t = 1..T

  double min_ess() const;
};

/// log Σ exp(x_i); −∞ for an empty or all −∞ input.
double log_sum_exp(const ConstVectorRef& x);

/// 1 / Σ W_i² for weights summing to one. Throws DegenerateWeights when all are zero.
double ess(const ConstVectorRef& weights);

/// Normalizes log weights into `weights`, returning logsumexp. Throws
/// NonFiniteWeight on NaN/+∞ and DegenerateWeights when every weight is zero.
double normalize_log_weights(const ConstVectorRef& log_weights, int time, Vector& weights);

/// N iid categorical draws, one uniform each, in order.
std::vector<int> multinomial_resample(const ConstVectorRef& weights, int count, Rng& rng);

/// l_T = terminal, l_t = a_{t+1}[l_{t+1}] with the ParticleSystem ancestor layout.
std::vector<int> trace_lineage(const std::vector<std::vector<int>>& ancestors, int terminal);

/// Bootstrap particle filter: the model's own proposal and ψ ≡ 1.
SmcOutput run_bpf(const StateSpaceModel& model, const ConstMatrixRef& observations, double lambda, int particles,
                  Rng& rng);

/// Controlled SMC under `policy` (nullptr means ψ ≡ 1). The constant-one
/// policy consumes random numbers exactly like `run_bpf`.
SmcOutput run_controlled_smc(const StateSpaceModel& model, const ConstMatrixRef& observations, double lambda,
                             const QuadraticPolicy* policy, int particles, Rng& rng);

/// Conditional controlled SMC with the reference path held in slot 0 at every
/// time; the output trajectory is drawn from the final weights.
SmcOutput run_conditional_smc(const StateSpaceModel& model, const ConstMatrixRef& observations, double lambda,
                              const QuadraticPolicy* policy, int particles, const Trajectory& reference, Rng& rng);

}  // namespace acsmc
