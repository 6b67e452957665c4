#include "acsmc/smc2.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "acsmc/error.hpp"
#include "acsmc/json_io.hpp"
#include "acsmc/kalman.hpp"
#include "acsmc/parallel.hpp"
#include "acsmc/smc.hpp"

namespace acsmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr std::uint64_t kResampleTag = ~std::uint64_t{0};

double std_normal_cdf(double z) { return 0.5 * boost::math::erfc(-z / std::sqrt(2.0)); }

double log_sigmoid(double u) { return u >= 0 ? -std::log1p(std::exp(-u)) : u - std::log1p(std::exp(u)); }

bool has_lower(const PriorComponent& c) { return std::isfinite(c.lower); }
bool has_upper(const PriorComponent& c) { return std::isfinite(c.upper); }

nlohmann::json real_to_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double real_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return kNegInf;
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

// ---------------------------------------------------------------------------

void PriorComponent::validate() const {
  switch (family) {
    case Family::Normal:
      if (!(sd > 0.0) || !std::isfinite(mean)) throw ConfigError("prior " + name + ": normal needs finite mean, sd > 0");
      break;
    case Family::TruncatedNormal:
      if (!(sd > 0.0) || !std::isfinite(mean) || !(lower < upper))
        throw ConfigError("prior " + name + ": truncated normal needs sd > 0 and lower < upper");
      break;
    case Family::Uniform:
      if (!has_lower(*this) || !has_upper(*this) || !(lower < upper))
        throw ConfigError("prior " + name + ": uniform needs finite lower < upper");
      break;
  }
}

double PriorComponent::sample(Rng& rng) const {
  switch (family) {
    case Family::Normal:
      return mean + sd * rng.normal();
    case Family::TruncatedNormal: {
      const double pa = has_lower(*this) ? std_normal_cdf((lower - mean) / sd) : 0.0;
      const double pb = has_upper(*this) ? std_normal_cdf((upper - mean) / sd) : 1.0;
      double u = pa + (pb - pa) * rng.uniform();
      u = std::clamp(u, std::numeric_limits<double>::min(), 1.0 - std::numeric_limits<double>::epsilon());
      const double x = mean + sd * boost::math::quantile(boost::math::normal(), u);
      return std::clamp(x, lower, upper);
    }
    case Family::Uniform:
      return lower + (upper - lower) * rng.uniform();
  }
  return 0.0;
}

bool PriorComponent::in_support(double x) const {
  if (!std::isfinite(x)) return false;
  switch (family) {
    case Family::Normal:
      return true;
    case Family::TruncatedNormal:
    case Family::Uniform:
      return x >= lower && x <= upper;
  }
  return false;
}

double PriorComponent::log_density(double x) const {
  if (!in_support(x)) return kNegInf;
  switch (family) {
    case Family::Normal: {
      const double z = (x - mean) / sd;
      return -0.5 * (kLog2Pi + z * z) - std::log(sd);
    }
    case Family::TruncatedNormal: {
      const double z = (x - mean) / sd;
      const double pa = has_lower(*this) ? std_normal_cdf((lower - mean) / sd) : 0.0;
      const double pb = has_upper(*this) ? std_normal_cdf((upper - mean) / sd) : 1.0;
      return -0.5 * (kLog2Pi + z * z) - std::log(sd) - std::log(pb - pa);
    }
    case Family::Uniform:
      return -std::log(upper - lower);
  }
  return kNegInf;
}

double PriorComponent::to_unconstrained(double x) const {
  if (family == Family::Normal) return x;
  if (has_lower(*this) && has_upper(*this)) {
    const double p = (x - lower) / (upper - lower);
    return std::log(p) - std::log1p(-p);
  }
  if (has_lower(*this)) return std::log(x - lower);
  if (has_upper(*this)) return std::log(upper - x);
  return x;
}

double PriorComponent::from_unconstrained(double u) const {
  if (family == Family::Normal) return u;
  if (has_lower(*this) && has_upper(*this)) return lower + (upper - lower) * std::exp(log_sigmoid(u));
  if (has_lower(*this)) return lower + std::exp(u);
  if (has_upper(*this)) return upper - std::exp(u);
  return u;
}

double PriorComponent::log_jacobian(double u) const {
  if (family == Family::Normal) return 0.0;
  if (has_lower(*this) && has_upper(*this)) return std::log(upper - lower) + log_sigmoid(u) + log_sigmoid(-u);
  if (has_lower(*this) || has_upper(*this)) return u;
  return 0.0;
}

Prior::Prior(std::vector<PriorComponent> components) : components_(std::move(components)) {
  if (components_.empty()) throw ConfigError("prior: no parameters");
  for (const auto& c : components_) c.validate();
}

std::vector<std::string> Prior::names() const {
  std::vector<std::string> out;
  for (const auto& c : components_) out.push_back(c.name);
  return out;
}

Vector Prior::sample(Rng& rng) const {
  Vector theta(dim());
  for (int i = 0; i < dim(); ++i) theta(i) = components_[i].sample(rng);
  return theta;
}

double Prior::log_density(const ConstVectorRef& theta) const {
  if (theta.size() != dim()) throw InvalidInput("prior: parameter dimension mismatch");
  double lp = 0.0;
  for (int i = 0; i < dim(); ++i) lp += components_[i].log_density(theta(i));
  return lp;
}

Vector Prior::to_unconstrained(const ConstVectorRef& theta) const {
  Vector u(dim());
  for (int i = 0; i < dim(); ++i) u(i) = components_[i].to_unconstrained(theta(i));
  return u;
}

Vector Prior::from_unconstrained(const ConstVectorRef& u) const {
  Vector theta(dim());
  for (int i = 0; i < dim(); ++i) theta(i) = components_[i].from_unconstrained(u(i));
  return theta;
}

double Prior::log_density_unconstrained(const ConstVectorRef& u) const {
  if (!u.allFinite()) return kNegInf;
  const Vector theta = from_unconstrained(u);
  double lp = 0.0;
  for (int i = 0; i < dim(); ++i) {
    const double l = components_[i].log_density(theta(i));
    if (l == kNegInf) return kNegInf;
    lp += l + components_[i].log_jacobian(u(i));
  }
  return lp;
}

// ---------------------------------------------------------------------------

double ParameterParticle::sum_log_obs() const { return std::accumulate(log_obs.begin(), log_obs.end(), 0.0); }

double incremental_logweight(const ParameterParticle& particle, double lambda_prev, double lambda) {
  if (particle.log_obs.empty()) throw InvalidInput("incremental_logweight: missing observation cache");
  if (lambda == lambda_prev) return 0.0;
  return (lambda - lambda_prev) * particle.sum_log_obs();
}

double tempered_ess(const ConstVectorRef& path_sums, double lambda_prev, double lambda) {
  const double delta = lambda - lambda_prev;
  Vector lw(path_sums.size());
  for (Eigen::Index i = 0; i < lw.size(); ++i) lw(i) = delta == 0.0 ? 0.0 : delta * path_sums(i);
  Vector w;
  normalize_log_weights(lw, -1, w);
  return ess(w);
}

double adapt_temperature(const ConstVectorRef& path_sums, double lambda_prev, double ess_fraction) {
  if (!(ess_fraction > 0.0 && ess_fraction < 1.0)) throw InvalidInput("adapt_temperature: kappa outside (0, 1)");
  if (!(lambda_prev >= 0.0 && lambda_prev < 1.0)) throw InvalidInput("adapt_temperature: lambda_prev outside [0, 1)");
  const double target = ess_fraction * static_cast<double>(path_sums.size());
  if (tempered_ess(path_sums, lambda_prev, 1.0) >= target) return 1.0;
  double lo = lambda_prev;
  double hi = 1.0;
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double e = tempered_ess(path_sums, lambda_prev, mid);
    if (e >= target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-10 && std::abs(e - target) <= 1e-9 * static_cast<double>(path_sums.size())) break;
  }
  return mid > lambda_prev ? mid : hi;
}

double pmmh_log_ratio(double log_prior_new, double log_lik_new, double log_prior_old, double log_lik_old,
                      double log_proposal_ratio) {
  if (log_prior_new == kNegInf || log_lik_new == kNegInf) return kNegInf;
  return log_prior_new + log_lik_new - log_prior_old - log_lik_old + log_proposal_ratio;
}

double pmmh_acceptance(double log_ratio) {
  if (std::isnan(log_ratio)) return 0.0;
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

void Smc2Config::validate() const {
  if (parameter_particles < 2) throw ConfigError("smc2: need at least two parameter particles");
  if (state_particles < 2) throw ConfigError("smc2: need at least two state particles");
  if (!(ess_fraction > 0.0 && ess_fraction < 1.0)) throw ConfigError("smc2: ess fraction must lie in (0, 1)");
  if (!(policy_threshold > 0.0 && policy_threshold < 1.0)) throw ConfigError("smc2: policy threshold must lie in (0, 1)");
  if (fixed_moves < 0 || max_moves < 1) throw ConfigError("smc2: invalid move counts");
  if (!(ladder_spacing > 0.0)) throw ConfigError("smc2: ladder spacing must be positive");
  if (!(rw_scale > 0.0)) throw ConfigError("smc2: random-walk scale must be positive");
}

TemperatureLadder policy_learning_ladder(double lambda, const Smc2Config& config) {
  TemperatureLadder l;
  l.values = {0.0};
  const double start = config.policy_threshold;
  const int m = std::max(2, static_cast<int>(std::ceil((lambda - start) / config.ladder_spacing)) + 1);
  for (int k = 0; k < m; ++k) {
    const double v = k + 1 == m ? lambda : start + (lambda - start) * k / (m - 1);
    if (v > l.values.back()) l.values.push_back(v);
  }
  return l;
}

LearnedPolicy learn_policy(const StateSpaceModel& model, const ConstMatrixRef& observations, double lambda,
                           const Smc2Config& config, Rng& rng) {
  const int horizon = static_cast<int>(observations.cols());
  LearnedPolicy out;
  if (!config.controlled || lambda <= config.policy_threshold) {
    out.policy = QuadraticPolicy::constant_one(model.policy_layout(), horizon);
    out.output = run_controlled_smc(model, observations, lambda, &out.policy, config.state_particles, rng);
    return out;
  }
  AcsmcOptions opts;
  opts.ridge = config.ridge;
  opts.alpha = config.alpha;
  auto r = run_acsmc(model, observations, policy_learning_ladder(lambda, config), config.state_particles, rng, opts);
  out.policy = std::move(r.policy);
  out.output = std::move(r.output);
  return out;
}

PmmhOutcome pmmh_step(const ModelFactory& factory, const Prior& prior, const ConstMatrixRef& observations,
                      ParameterParticle& particle, double lambda, const ConstMatrixRef& proposal_chol,
                      const Smc2Config& config, Rng& rng) {
  const int dim = prior.dim();
  const Vector u = prior.to_unconstrained(particle.theta);
  Vector z(dim);
  for (int i = 0; i < dim; ++i) z(i) = rng.normal();
  const Vector u_new = u + proposal_chol * z;
  const double log_u = std::log(rng.uniform());
  PmmhOutcome out;
  const double lp_new = prior.log_density_unconstrained(u_new);
  if (lp_new == kNegInf) {
    out.log_ratio = kNegInf;
    return out;
  }
  const Vector theta_new = prior.from_unconstrained(u_new);
  std::unique_ptr<StateSpaceModel> model;
  try {
    model = factory(theta_new);
  } catch (const InvalidInput&) {
    out.log_ratio = kNegInf;
    return out;
  }
  LearnedPolicy learned;
  try {
    learned = learn_policy(*model, observations, lambda, config, rng);
  } catch (const StageFailure&) {
    out.log_ratio = kNegInf;
    return out;
  } catch (const DegenerateWeights&) {
    out.log_ratio = kNegInf;
    return out;
  } catch (const NonFiniteWeight&) {
    out.log_ratio = kNegInf;
    return out;
  } catch (const PolicyInvariantError&) {
    out.log_ratio = kNegInf;
    return out;
  } catch (const DecompositionError&) {
    out.log_ratio = kNegInf;
    return out;
  }
  const double lp_old = prior.log_density_unconstrained(u);
  out.log_ratio = pmmh_log_ratio(lp_new, learned.output.log_likelihood, lp_old, particle.log_likelihood);
  if (log_u < out.log_ratio) {
    out.accepted = true;
    particle.theta = theta_new;
    particle.log_likelihood = learned.output.log_likelihood;
    particle.trajectory = std::move(learned.output.trajectory);
    particle.log_obs = std::move(learned.output.path_log_obs);
    particle.policy = std::move(learned.policy);
  }
  return out;
}

namespace {

ParameterParticle initial_particle(const ModelFactory& factory, const Prior& prior, int horizon, Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    ParameterParticle p;
    p.theta = prior.sample(rng);
    std::unique_ptr<StateSpaceModel> model;
    try {
      model = factory(p.theta);
    } catch (const InvalidInput&) {
      continue;
    }
    const auto dims = model->dims();
    p.trajectory.states.resize(dims.state, horizon + 1);
    p.trajectory.noises.resize(dims.noise, horizon + 1);
    Vector s(dims.state), e(dims.noise);
    model->sample_initial_state(rng, s, e);
    p.trajectory.states.col(0) = s;
    p.trajectory.noises.col(0) = e;
    for (int t = 1; t <= horizon; ++t) {
      model->sample_transition(p.trajectory.states.col(t - 1), rng, s, e);
      p.trajectory.states.col(t) = s;
      p.trajectory.noises.col(t) = e;
    }
    p.policy = QuadraticPolicy::constant_one(model->policy_layout(), horizon);
    return p;
  }
  throw ConfigError("smc2: prior draws fall outside the model support");
}

Matrix random_walk_chol(const Prior& prior, const std::vector<ParameterParticle>& cloud, const Smc2Config& config) {
  const int dim = prior.dim();
  const int count = static_cast<int>(cloud.size());
  Matrix u(dim, count);
  for (int p = 0; p < count; ++p) u.col(p) = prior.to_unconstrained(cloud[p].theta);
  const Vector mean = u.rowwise().mean();
  const Matrix centered = u.colwise() - mean;
  const Matrix cov = centered * centered.transpose() / std::max(1, count - 1);
  Matrix prop = linalg::symmetrize(config.rw_scale * config.rw_scale / dim * cov);
  double jitter = config.rw_jitter;
  for (int attempt = 0; attempt < 30; ++attempt) {
    const Matrix m = prop + jitter * Matrix::Identity(dim, dim);
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    jitter *= 10.0;
  }
  throw DecompositionError("smc2: random-walk covariance is not positive definite");
}

}  // namespace

Smc2State run_adaptive_smc2(const ModelFactory& factory, const Prior& prior, const ConstMatrixRef& observations,
                            const Smc2Config& config, const Smc2State* resume,
                            const std::function<void(const Smc2State&)>& on_iteration) {
  config.validate();
  const int horizon = static_cast<int>(observations.cols());
  if (horizon < 1) throw InvalidInput("smc2: at least one observation is required");
  const int count = config.parameter_particles;
  const int threads = resolve_threads(config.threads);

  Smc2State state;
  if (resume != nullptr) {
    state = *resume;
    if (static_cast<int>(state.cloud.size()) != count) throw ConfigError("smc2: checkpoint cloud size mismatch");
  } else {
    state.cloud.resize(count);
    parallel_for(count, threads, [&](int p) {
      Rng rng(config.seed, {0, static_cast<std::uint64_t>(p), 0});
      state.cloud[p] = initial_particle(factory, prior, horizon, rng);
      const auto model = factory(state.cloud[p].theta);
      state.cloud[p].log_obs = trajectory_log_obs(*model, state.cloud[p].trajectory, observations);
    });
  }

  while (!state.finished()) {
    if (config.max_iterations >= 0 && state.iteration >= config.max_iterations) break;
    const auto started = std::chrono::steady_clock::now();
    const int it = state.iteration + 1;
    const auto iter_tag = static_cast<std::uint64_t>(it);
    Smc2IterationDiagnostics diag;
    diag.iteration = it;

    // Temperature, weights, evidence.
    Vector sums(count);
    for (int p = 0; p < count; ++p) sums(p) = state.cloud[p].sum_log_obs();
    const double lambda_prev = state.lambda;
    const double lambda = adapt_temperature(sums, lambda_prev, config.ess_fraction);
    Vector logw(count);
    for (int p = 0; p < count; ++p) logw(p) = incremental_logweight(state.cloud[p], lambda_prev, lambda);
    Vector w;
    const double lse = normalize_log_weights(logw, -1, w);
    diag.lambda = lambda;
    diag.ess = ess(w);
    diag.log_evidence_increment = lse - std::log(static_cast<double>(count));

    // Resample.
    Rng resample_rng(config.seed, {iter_tag, kResampleTag});
    const auto ancestors = multinomial_resample(w, count, resample_rng);
    std::vector<ParameterParticle> cloud(count);
    for (int p = 0; p < count; ++p) cloud[p] = state.cloud[ancestors[p]];

    // Policy learning and conditional SMC refresh.
    parallel_for(count, threads, [&](int p) {
      Rng rng(config.seed, {iter_tag, static_cast<std::uint64_t>(p), 0});
      auto& particle = cloud[p];
      const auto model = factory(particle.theta);
      // Any policy leaves the conditional kernel invariant, so a failed
      // learning chain falls back to the bootstrap policy.
      LearnedPolicy learned;
      try {
        learned = learn_policy(*model, observations, lambda, config, rng);
      } catch (const StageFailure&) {
        learned.policy = QuadraticPolicy::constant_one(model->policy_layout(), horizon);
      } catch (const DecompositionError&) {
        learned.policy = QuadraticPolicy::constant_one(model->policy_layout(), horizon);
      }
      auto refreshed = run_conditional_smc(*model, observations, lambda, &learned.policy, config.state_particles,
                                           particle.trajectory, rng);
      particle.policy = std::move(learned.policy);
      particle.log_likelihood = refreshed.log_likelihood;
      particle.trajectory = std::move(refreshed.trajectory);
      particle.log_obs = std::move(refreshed.path_log_obs);
    });

    // PMMH sweeps with a proposal frozen on the pre-move cloud.
    const Matrix chol = random_walk_chol(prior, cloud, config);
    double cumulative = 0.0;
    const int sweeps = config.fixed_moves > 0 ? config.fixed_moves : config.max_moves;
    for (int k = 1; k <= sweeps; ++k) {
      std::vector<char> accepted(count, 0);
      parallel_for(count, threads, [&](int p) {
        Rng rng(config.seed, {iter_tag, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(k)});
        accepted[p] = pmmh_step(factory, prior, observations, cloud[p], lambda, chol, config, rng).accepted ? 1 : 0;
      });
      const double rate = static_cast<double>(std::count(accepted.begin(), accepted.end(), 1)) / count;
      diag.acceptance_rates.push_back(rate);
      cumulative += rate;
      if (config.fixed_moves == 0 && cumulative >= config.acceptance_target) break;
    }

    state.cloud = std::move(cloud);
    state.lambda = lambda;
    state.iteration = it;
    state.ladder.push_back(lambda);
    state.log_evidence += diag.log_evidence_increment;
    diag.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    state.diagnostics.push_back(std::move(diag));
    if (on_iteration) on_iteration(state);
  }
  return state;
}

PosteriorSummary summarize_cloud(const Prior& prior, const std::vector<ParameterParticle>& cloud) {
  const int dim = prior.dim();
  const int count = static_cast<int>(cloud.size());
  if (count == 0) throw InvalidInput("summarize_cloud: empty cloud");
  PosteriorSummary s;
  s.names = prior.names();
  s.mean = Vector::Zero(dim);
  s.sd = Vector::Zero(dim);
  s.quantiles = Matrix::Zero(dim, 3);
  for (int i = 0; i < dim; ++i) {
    std::vector<double> v(count);
    for (int p = 0; p < count; ++p) v[p] = cloud[p].theta(i);
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / count;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    s.mean(i) = m;
    s.sd(i) = std::sqrt(ss / count);
    std::sort(v.begin(), v.end());
    const double probs[3] = {0.05, 0.5, 0.95};
    for (int q = 0; q < 3; ++q) {
      const double pos = probs[q] * (count - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = std::min(lo + 1, v.size() - 1);
      s.quantiles(i, q) = v[lo] + (pos - lo) * (v[hi] - v[lo]);
    }
  }
  return s;
}

nlohmann::json state_to_json(const Smc2State& state) {
  using nlohmann::json;
  json cloud = json::array();
  for (const auto& p : state.cloud) {
    json log_obs = json::array();
    for (double v : p.log_obs) log_obs.push_back(real_to_json(v));
    cloud.push_back({{"theta", json_io::vector_to_json(p.theta)},
                     {"log_likelihood", real_to_json(p.log_likelihood)},
                     {"log_obs", std::move(log_obs)},
                     {"states", json_io::matrix_to_shaped_json(p.trajectory.states)},
                     {"noises", json_io::matrix_to_shaped_json(p.trajectory.noises)},
                     {"policy", policy_to_json(p.policy)}});
  }
  json diags = json::array();
  for (const auto& d : state.diagnostics) {
    diags.push_back({{"iteration", d.iteration},
                     {"lambda", d.lambda},
                     {"ess", d.ess},
                     {"log_evidence_increment", d.log_evidence_increment},
                     {"acceptance_rates", d.acceptance_rates},
                     {"wall_seconds", d.wall_seconds}});
  }
  return {{"format", "smc2-state"},
          {"version", 1},
          {"iteration", state.iteration},
          {"lambda", state.lambda},
          {"ladder", state.ladder},
          {"log_evidence", state.log_evidence},
          {"diagnostics", std::move(diags)},
          {"cloud", std::move(cloud)}};
}

Smc2State state_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "smc2-state" || j.value("version", 0) != 1)
    throw ConfigError("checkpoint: unsupported format or version");
  Smc2State s;
  s.iteration = j.at("iteration").get<int>();
  s.lambda = j.at("lambda").get<double>();
  s.ladder = j.at("ladder").get<std::vector<double>>();
  s.log_evidence = j.at("log_evidence").get<double>();
  for (const auto& d : j.at("diagnostics")) {
    Smc2IterationDiagnostics x;
    x.iteration = d.at("iteration").get<int>();
    x.lambda = d.at("lambda").get<double>();
    x.ess = d.at("ess").get<double>();
    x.log_evidence_increment = d.at("log_evidence_increment").get<double>();
    x.acceptance_rates = d.at("acceptance_rates").get<std::vector<double>>();
    x.wall_seconds = d.at("wall_seconds").get<double>();
    s.diagnostics.push_back(std::move(x));
  }
  for (const auto& c : j.at("cloud")) {
    ParameterParticle p;
    p.theta = json_io::vector_from_json(c.at("theta"), "checkpoint.theta");
    p.log_likelihood = real_from_json(c.at("log_likelihood"));
    for (const auto& v : c.at("log_obs")) p.log_obs.push_back(real_from_json(v));
    p.trajectory.states = json_io::matrix_from_json(c.at("states"), "checkpoint.states");
    p.trajectory.noises = json_io::matrix_from_json(c.at("noises"), "checkpoint.noises");
    p.policy = policy_from_json(c.at("policy"));
    s.cloud.push_back(std::move(p));
  }
  return s;
}

}  // namespace acsmc
