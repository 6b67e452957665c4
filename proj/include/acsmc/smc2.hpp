#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "acsmc/annealing.hpp"
#include "acsmc/model.hpp"
#include "acsmc/policy.hpp"
#include "acsmc/rng.hpp"

namespace acsmc {

// ---------------------------------------------------------------------------
// Priors

struct PriorComponent {
  enum class Family { Normal, TruncatedNormal, Uniform };

  std::string name;
  Family family = Family::Normal;
  double mean = 0.0;  // normal, truncated normal
  double sd = 1.0;
  double lower = -std::numeric_limits<double>::infinity();  // truncated normal, uniform
  double upper = std::numeric_limits<double>::infinity();

  void validate() const;
  double sample(Rng& rng) const;
  double log_density(double x) const;
  bool in_support(double x) const;
  /// Map to and from the unconstrained line (identity, log or logit).
  double to_unconstrained(double x) const;
  double from_unconstrained(double u) const;
  /// log |dx/du| at u
  double log_jacobian(double u) const;
};

class Prior {
 public:
  Prior() = default;
  explicit Prior(std::vector<PriorComponent> components);

  int dim() const { return static_cast<int>(components_.size()); }
  const std::vector<PriorComponent>& components() const { return components_; }
  std::vector<std::string> names() const;

  Vector sample(Rng& rng) const;
  /// −∞ outside the support.
  double log_density(const ConstVectorRef& theta) const;
  Vector to_unconstrained(const ConstVectorRef& theta) const;
  Vector from_unconstrained(const ConstVectorRef& u) const;
  /// log p(θ(u)) + log |dθ/du|: the prior density on the unconstrained scale.
  double log_density_unconstrained(const ConstVectorRef& u) const;

 private:
  std::vector<PriorComponent> components_;
};

/// θ ↦ model. Throws InvalidInput when θ is outside the model's support,
/// which PMMH treats as zero prior mass.
using ModelFactory = std::function<std::unique_ptr<StateSpaceModel>(const Vector& theta)>;

// ---------------------------------------------------------------------------
// Cloud

struct ParameterParticle {
  Vector theta;
  Trajectory trajectory;
  double log_likelihood = 0.0;    // log p̂(y | θ, λ) at the cloud's current λ
  std::vector<double> log_obs;    // log g(y_t | s_{t−1}, s_t) along the trajectory
  QuadraticPolicy policy;

  double sum_log_obs() const;
};

/// (λ − λ_prev) Σ_t log g along the particle's trajectory.
double incremental_logweight(const ParameterParticle& particle, double lambda_prev, double lambda);

/// ESS of the normalized weights exp((λ − λ_prev) S_p) for path sums S_p.
double tempered_ess(const ConstVectorRef& path_sums, double lambda_prev, double lambda);

/// Next temperature: 1 when ESS(1) >= κP, else the bisection root of ESS(λ) = κP.
double adapt_temperature(const ConstVectorRef& path_sums, double lambda_prev, double ess_fraction);

/// log of the Metropolis–Hastings ratio p(θ*)p̂* h(θ|θ*) / (p(θ)p̂ h(θ*|θ)); −∞ when p(θ*) = 0.
double pmmh_log_ratio(double log_prior_new, double log_lik_new, double log_prior_old, double log_lik_old,
                      double log_proposal_ratio = 0.0);
/// min(1, exp(log ratio))
double pmmh_acceptance(double log_ratio);

struct Smc2Config {
  int parameter_particles = 512;    // P
  int state_particles = 64;         // N
  double ess_fraction = 0.5;        // κ_ESS
  int fixed_moves = 0;              // > 0: exactly this many PMMH sweeps
  double acceptance_target = 2.0;   // otherwise sweep until cumulative acceptance reaches this
  int max_moves = 30;
  double policy_threshold = 0.1;    // λ_*
  double ladder_spacing = 0.25;     // spacing of the per-particle policy-learning ladder
  double rw_scale = 2.38;           // covariance = rw_scale² / d_θ × cloud covariance
  double rw_jitter = 1e-10;
  bool controlled = true;           // false: constant-one policies throughout (BPF)
  RidgeConfig ridge;
  double alpha = kDefaultAlpha;
  int threads = 1;
  std::uint64_t seed = 0;
  int max_iterations = -1;          // stop early after this many annealing iterations (< 0: run to λ = 1)

  void validate() const;
};

struct Smc2IterationDiagnostics {
  int iteration = 0;
  double lambda = 0.0;
  double ess = 0.0;                      // before resampling
  double log_evidence_increment = 0.0;
  std::vector<double> acceptance_rates;  // per PMMH sweep
  double wall_seconds = 0.0;
};

struct Smc2State {
  int iteration = 0;
  double lambda = 0.0;
  std::vector<double> ladder{0.0};
  double log_evidence = 0.0;
  std::vector<ParameterParticle> cloud;
  std::vector<Smc2IterationDiagnostics> diagnostics;

  bool finished() const { return lambda >= 1.0; }
};

/// Per-particle policy for θ at λ: ψ ≡ 1 when λ <= λ_*, else an annealed
/// controlled SMC chain on {0} ∪ {λ_*, …, λ}. The returned output is the
/// final-stage SMC at λ, an unbiased likelihood estimate under that policy.
struct LearnedPolicy {
  QuadraticPolicy policy;
  SmcOutput output;
};
LearnedPolicy learn_policy(const StateSpaceModel& model, const ConstMatrixRef& observations, double lambda,
                           const Smc2Config& config, Rng& rng);

/// Ladder used by `learn_policy` for λ > λ_*.
TemperatureLadder policy_learning_ladder(double lambda, const Smc2Config& config);

struct PmmhOutcome {
  bool accepted = false;
  double log_ratio = 0.0;
};

/// One PMMH move of `particle` with a Gaussian random walk on the
/// unconstrained scale (`proposal_chol` is the lower Cholesky factor).
PmmhOutcome pmmh_step(const ModelFactory& factory, const Prior& prior, const ConstMatrixRef& observations,
                      ParameterParticle& particle, double lambda, const ConstMatrixRef& proposal_chol,
                      const Smc2Config& config, Rng& rng);

/// Algorithm driver. `resume` continues a checkpointed state; `on_iteration`
/// runs after every annealing iteration (for checkpointing).
Smc2State run_adaptive_smc2(const ModelFactory& factory, const Prior& prior, const ConstMatrixRef& observations,
                            const Smc2Config& config, const Smc2State* resume = nullptr,
                            const std::function<void(const Smc2State&)>& on_iteration = {});

struct PosteriorSummary {
  std::vector<std::string> names;
  Vector mean;
  Vector sd;
  Matrix quantiles;  // d_θ × 3: 5%, 50%, 95%
};
PosteriorSummary summarize_cloud(const Prior& prior, const std::vector<ParameterParticle>& cloud);

nlohmann::json state_to_json(const Smc2State& state);
Smc2State state_from_json(const nlohmann::json& j);

}  // namespace acsmc
