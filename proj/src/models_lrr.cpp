#include <cmath>
#include <limits>
#include <string>

#include "acsmc/error.hpp"
#include "acsmc/models.hpp"

namespace acsmc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kSeriesSwitch = 50.0;

double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

double log_bessel_series(double v, double x) {
  const double log_half_x = std::log(0.5 * x);
  double log_term = v * log_half_x - std::lgamma(v + 1.0);
  double acc = log_term;
  const double peak = 0.5 * x;
  for (int k = 0; k < 1000000; ++k) {
    log_term += 2.0 * log_half_x - std::log(k + 1.0) - std::log(k + v + 1.0);
    acc = log_add_exp(acc, log_term);
    if (k > peak && log_term < acc - 40.0) break;
  }
  return acc;
}

// Large-argument expansion; returns NaN when the series stops converging
// before reaching double precision.
double log_bessel_asymptotic(double v, double x) {
  const double mu = 4.0 * v * v;
  double sum = 1.0;
  double term = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double next = -term * (mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (k * 8.0 * x);
    if (std::abs(next) >= std::abs(term)) return std::numeric_limits<double>::quiet_NaN();
    sum += next;
    term = next;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  if (!(sum > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return x - 0.5 * std::log(2.0 * M_PI * x) + std::log(sum);
}

double normal_logpdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + r * r / var);
}

}  // namespace

double log_bessel_i(double order, double x) {
  if (!(order > -1.0) || !std::isfinite(order)) throw InvalidInput("log_bessel_i: order must exceed -1");
  if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidInput("log_bessel_i: argument must be finite and non-negative");
  if (x == 0.0) return order == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (x <= kSeriesSwitch) return log_bessel_series(order, x);
  const double a = log_bessel_asymptotic(order, x);
  return std::isnan(a) ? log_bessel_series(order, x) : a;
}

void ArgParams::validate() const {
  if (!(nu >= 0.0 && nu < 1.0)) throw InvalidInput("ARG: nu must lie in [0, 1)");
  if (!(shape > 0.0) || !std::isfinite(shape)) throw InvalidInput("ARG: shape must be positive");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidInput("ARG: scale must be positive");
}

double arg_transition_logdensity(const ArgParams& p, double prev, double next) {
  p.validate();
  if (!(prev > 0.0) || !(next > 0.0) || !std::isfinite(prev) || !std::isfinite(next))
    throw InvalidInput("ARG density: variances must be positive");
  const double v = p.shape - 1.0;
  const double lam = p.nu * prev;
  const double x = 2.0 * std::sqrt(lam * next) / p.scale;
  // (next/lam)^{v/2} I_v(x) = (next/c)^v S(x) with S(x) = I_v(x) / (x/2)^v.
  const double log_s = x == 0.0 ? -std::lgamma(v + 1.0) : log_bessel_i(v, x) - v * std::log(0.5 * x);
  return v * std::log(next) - p.shape * std::log(p.scale) - (next + lam) / p.scale + log_s;
}

double arg_sample(const ArgParams& p, double prev, Rng& rng) {
  p.validate();
  if (!(prev > 0.0)) throw InvalidInput("ARG sampler: previous variance must be positive");
  const auto k = rng.poisson(p.nu * prev / p.scale);
  double out = rng.gamma(p.shape + static_cast<double>(k), p.scale);
  // Gamma draws underflow to 0 only for tiny shapes; keep the support open.
  if (!(out > 0.0)) out = std::numeric_limits<double>::min();
  return out;
}

// ---------------------------------------------------------------------------

MarketReturnFn AffinePricing::market() const {
  const AffinePricing c = *this;
  return [c](double x_prev, double v_prev, double x, double v, double dd) {
    return c.m0 + c.m_xprev * x_prev + c.m_vprev * v_prev + c.m_x * x + c.m_v * v + c.m_d * dd;
  };
}

RiskFreeFn AffinePricing::riskfree() const {
  const AffinePricing c = *this;
  return [c](double x, double v) { return c.r0 + c.r_x * x + c.r_v * v; };
}

void LrrSpec::validate() const {
  vol.validate();
  if (!(vol.nu > 0.0)) throw InvalidInput("LRR: nu must lie in (0, 1)");
  if (!(vol.shape > 1.0)) throw InvalidInput("LRR: Feller condition phi_s > 1 violated");
  if (!(std::abs(rho) < 1.0)) throw InvalidInput("LRR: rho must lie in (-1, 1)");
  if (!(phi_x > 0.0) || !(phi_d > 0.0) || !(phi_m > 0.0) || !(phi_r > 0.0))
    throw InvalidInput("LRR: scale parameters must be positive");
  for (double v : {delta, gamma, psi, mu, mu_d, Phi, phi_dc})
    if (!std::isfinite(v)) throw InvalidInput("LRR: non-finite parameter");
}

LrrModel::LrrModel(LrrSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  market_ = spec_.market ? spec_.market : spec_.pricing.market();
  riskfree_ = spec_.riskfree ? spec_.riskfree : spec_.pricing.riskfree();
}

Vector LrrModel::initial_state() const {
  Vector s(2);
  s << 0.0, spec_.vol.long_run_mean();
  return s;
}

std::pair<double, double> LrrModel::lognormal_parameters(double prev_var) const {
  const double m = spec_.vol.conditional_mean(prev_var);
  const double v = spec_.vol.conditional_variance(prev_var);
  const double vq = std::log(v / (m * m) + 1.0);
  return {std::log(m) - 0.5 * vq, vq};
}

double LrrModel::transition_logdensity(const ConstVectorRef& prev, const ConstVectorRef& state) const {
  if (!(state(1) > 0.0)) return -std::numeric_limits<double>::infinity();
  const double var_x = spec_.phi_x * spec_.phi_x * prev(1);
  return normal_logpdf(state(0), spec_.rho * prev(0), var_x) + arg_transition_logdensity(spec_.vol, prev(1), state(1));
}

void LrrModel::transform(const ConstVectorRef& state, VectorRef z) const {
  z(0) = state(0);
  z(1) = std::log(state(1));
}

void LrrModel::inverse_transform(const ConstVectorRef& z, VectorRef state) const {
  state(0) = z(0);
  state(1) = std::exp(z(1));
}

double LrrModel::log_jacobian(const ConstVectorRef& state) const { return -std::log(state(1)); }

void LrrModel::proposal_moments(const ConstVectorRef& prev, VectorRef mean, Matrix& cov) const {
  const auto [mq, vq] = lognormal_parameters(prev(1));
  mean(0) = spec_.rho * prev(0);
  mean(1) = mq;
  cov = Matrix::Zero(2, 2);
  cov(0, 0) = spec_.phi_x * spec_.phi_x * prev(1);
  cov(1, 1) = vq;
}

double LrrModel::base_log_weight(const ConstVectorRef& prev, const ConstVectorRef& state) const {
  // The x-proposal equals its transition, so only the volatility factor remains.
  const double v = state(1);
  if (!(v > 0.0)) return -std::numeric_limits<double>::infinity();
  const auto [mq, vq] = lognormal_parameters(prev(1));
  const double log_q = -std::log(v) + normal_logpdf(std::log(v), mq, vq);
  return arg_transition_logdensity(spec_.vol, prev(1), v) - log_q;
}

void LrrModel::sample_transition(const ConstVectorRef& prev, Rng& rng, VectorRef state, VectorRef) const {
  const double eps = rng.normal();
  state(0) = spec_.rho * prev(0) + spec_.phi_x * std::sqrt(prev(1)) * eps;
  state(1) = arg_sample(spec_.vol, prev(1), rng);
}

double LrrModel::obs_logdensity(int, const ConstVectorRef& prev, const ConstVectorRef& state,
                                const ConstVectorRef& y) const {
  const double x_prev = prev(0), v_prev = prev(1);
  const double dc = y(0), dd = y(1), m = y(2), r = y(3);
  double lp = normal_logpdf(dc, spec_.mu + x_prev, v_prev);
  lp += normal_logpdf(dd, spec_.mu_d + spec_.Phi * x_prev + spec_.phi_dc * (dc - spec_.mu - x_prev),
                      spec_.phi_d * spec_.phi_d * v_prev);
  lp += normal_logpdf(m, market_(x_prev, v_prev, state(0), state(1), dd), spec_.phi_m * spec_.phi_m);
  lp += normal_logpdf(r, riskfree_(state(0), state(1)), spec_.phi_r * spec_.phi_r);
  return lp;
}

void LrrModel::sample_observation(int, const ConstVectorRef& prev, const ConstVectorRef& state, Rng& rng,
                                  VectorRef y) const {
  const double x_prev = prev(0), sd_prev = std::sqrt(prev(1));
  const double uc = rng.normal();
  const double ud = rng.normal();
  const double um = rng.normal();
  const double ur = rng.normal();
  y(0) = spec_.mu + x_prev + sd_prev * uc;
  y(1) = spec_.mu_d + spec_.Phi * x_prev + spec_.phi_dc * sd_prev * uc + spec_.phi_d * sd_prev * ud;
  y(2) = market_(x_prev, prev(1), state(0), state(1), y(1)) + spec_.phi_m * um;
  y(3) = riskfree_(state(0), state(1)) + spec_.phi_r * ur;
}

}  // namespace acsmc
