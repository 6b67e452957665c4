#include "acsmc/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "acsmc/error.hpp"
#include "acsmc/json_io.hpp"
#include "acsmc/kalman.hpp"

namespace acsmc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Relative rounding slack when checking the inductive αI + A ≻ 0 invariant.
// A refinement that hits κ = (ζ − 1)/Λ_min leaves αI + A with eigenvalues of
// order ζ·λ_min, which rounding can push a hair below zero.
constexpr double kInvariantSlack = 1e-10;

void check_dims(const QuadCoeffs& c, const ConstVectorRef& z, const ConstVectorRef& zp) {
  if (zp.size() != c.proposal_dim() || z.size() != c.conditioning_dim())
    throw InvalidInput("quadratic policy: argument dimensions do not match coefficients");
}

}  // namespace

QuadCoeffs QuadCoeffs::zero(int proposal_dim, int conditioning_dim) {
  if (proposal_dim < 0 || conditioning_dim < 0) throw InvalidInput("QuadCoeffs::zero: negative dimension");
  QuadCoeffs c;
  c.A = Matrix::Zero(proposal_dim, proposal_dim);
  c.b = Vector::Zero(proposal_dim);
  c.C = Matrix::Zero(proposal_dim, conditioning_dim);
  c.D = Matrix::Zero(conditioning_dim, conditioning_dim);
  c.e = Vector::Zero(conditioning_dim);
  c.f = 0.0;
  return c;
}

double QuadCoeffs::quadratic(const ConstVectorRef& z, const ConstVectorRef& zp) const {
  check_dims(*this, z, zp);
  double q = f;
  if (zp.size() > 0) {
    q += zp.dot(A * zp) + zp.dot(b);
    if (z.size() > 0) q += zp.dot(C * z);
  }
  if (z.size() > 0) q += z.dot(D * z) + z.dot(e);
  return q;
}

QuadCoeffs& QuadCoeffs::add_scaled(const QuadCoeffs& other, double scale) {
  if (!same_shape(other)) throw InvalidInput("QuadCoeffs::add_scaled: shape mismatch");
  A += scale * other.A;
  b += scale * other.b;
  C += scale * other.C;
  D += scale * other.D;
  e += scale * other.e;
  f += scale * other.f;
  A = linalg::symmetrize(A);
  D = linalg::symmetrize(D);
  return *this;
}

bool QuadCoeffs::is_zero() const {
  return f == 0.0 && (A.size() == 0 || A.isZero(0.0)) && (b.size() == 0 || b.isZero(0.0)) &&
         (C.size() == 0 || C.isZero(0.0)) && (D.size() == 0 || D.isZero(0.0)) && (e.size() == 0 || e.isZero(0.0));
}

bool QuadCoeffs::same_shape(const QuadCoeffs& o) const {
  return A.rows() == o.A.rows() && A.cols() == o.A.cols() && b.size() == o.b.size() && C.rows() == o.C.rows() &&
         C.cols() == o.C.cols() && D.rows() == o.D.rows() && D.cols() == o.D.cols() && e.size() == o.e.size();
}

double eval_logpolicy(const QuadCoeffs& coeffs, const ConstVectorRef& z, const ConstVectorRef& zp) {
  return -coeffs.quadratic(z, zp);
}

QuadraticPolicy QuadraticPolicy::constant_one(const PolicyLayout& layout, int horizon) {
  if (horizon < 0) throw InvalidInput("QuadraticPolicy::constant_one: negative horizon");
  QuadraticPolicy p;
  p.steps.reserve(horizon + 1);
  p.steps.push_back(QuadCoeffs::zero(layout.initial_proposal_dim, 0));
  for (int t = 1; t <= horizon; ++t) p.steps.push_back(QuadCoeffs::zero(layout.proposal_dim, layout.conditioning_dim));
  return p;
}

bool QuadraticPolicy::is_constant_one() const {
  return std::all_of(steps.begin(), steps.end(), [](const QuadCoeffs& c) { return c.is_zero(); });
}

QuadCoeffs fit_logquadratic(const ConstMatrixRef& conditioning, const ConstMatrixRef& proposal,
                            const ConstVectorRef& targets, const RidgeConfig& ridge) {
  const auto n_points = targets.size();
  const int m = static_cast<int>(proposal.rows());
  const int n = static_cast<int>(conditioning.rows());
  if (proposal.cols() != n_points || conditioning.cols() != n_points)
    throw InvalidInput("fit_logquadratic: support and target counts differ");
  if (n_points == 0) throw InvalidInput("fit_logquadratic: no support points");
  if (!(ridge.shrinkage > 0.0)) throw InvalidInput("fit_logquadratic: shrinkage must be positive");
  for (Eigen::Index i = 0; i < n_points; ++i)
    if (!std::isfinite(targets(i)))
      throw InvalidInput("fit_logquadratic: non-finite target at index " + std::to_string(i));

  // Joint variable w = (z', z).
  const int p = m + n;
  Matrix w(p, n_points);
  if (m > 0) w.topRows(m) = proposal;
  if (n > 0) w.bottomRows(n) = conditioning;
  linalg::require_finite(w, "fit_logquadratic support");

  Vector mu = Vector::Zero(p);
  Vector sd = Vector::Ones(p);
  if (ridge.standardize && p > 0) {
    mu = w.rowwise().mean();
    for (int i = 0; i < p; ++i) {
      const double var = (w.row(i).array() - mu(i)).square().mean();
      const double s = std::sqrt(var);
      sd(i) = (s > 1e-12 * std::max(1.0, std::abs(mu(i)))) ? s : 1.0;
    }
  }
  const Matrix u = (w.colwise() - mu).array().colwise() / sd.array();

  // Features: u_i u_j (i <= j), u_i, 1.
  const int n_quad = p * (p + 1) / 2;
  const int n_feat = n_quad + p + 1;
  Matrix x(n_points, n_feat);
  for (Eigen::Index k = 0; k < n_points; ++k) {
    int col = 0;
    for (int i = 0; i < p; ++i)
      for (int j = i; j < p; ++j) x(k, col++) = u(i, k) * u(j, k);
    for (int i = 0; i < p; ++i) x(k, col++) = u(i, k);
    x(k, col) = 1.0;
  }
  Matrix gram = x.transpose() * x;
  const double penalty = ridge.shrinkage * static_cast<double>(n_points);
  for (int i = 0; i < n_feat - 1; ++i) gram(i, i) += penalty;
  const Vector rhs = x.transpose() * targets;
  Vector beta;
  Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() == Eigen::Success) beta = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !beta.allFinite())
    beta = gram.completeOrthogonalDecomposition().solve(rhs);

  // Fitted F(u) = uᵀH_u u + g_uᵀu + c_u approximates log φ = −Q.
  Matrix hu = Matrix::Zero(p, p);
  int col = 0;
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j) {
      if (i == j) {
        hu(i, i) = beta(col);
      } else {
        hu(i, j) = 0.5 * beta(col);
        hu(j, i) = 0.5 * beta(col);
      }
      ++col;
    }
  const Vector gu = beta.segment(n_quad, p);
  const double cu = beta(n_feat - 1);

  const Vector inv_sd = sd.cwiseInverse();
  const Matrix hw = inv_sd.asDiagonal() * hu * inv_sd.asDiagonal();
  const Vector gu_scaled = inv_sd.cwiseProduct(gu);
  const Vector gw = gu_scaled - 2.0 * hw * mu;
  const double cw = cu + mu.dot(hw * mu) - gu_scaled.dot(mu);

  QuadCoeffs out = QuadCoeffs::zero(m, n);
  if (m > 0) {
    out.A = linalg::symmetrize(-hw.topLeftCorner(m, m));
    out.b = -gw.head(m);
  }
  if (m > 0 && n > 0) out.C = -2.0 * hw.topRightCorner(m, n);
  if (n > 0) {
    out.D = linalg::symmetrize(-hw.bottomRightCorner(n, n));
    out.e = -gw.tail(n);
  }
  out.f = -cw;
  return out;
}

QuadCoeffs dim_reduce_lift(const QuadCoeffs& reduced, const ConstMatrixRef& state_matrix,
                           const ConstMatrixRef& noise_matrix) {
  const auto d = state_matrix.rows();
  if (reduced.conditioning_dim() != 0 || reduced.proposal_dim() != d || state_matrix.cols() != d ||
      noise_matrix.rows() != d)
    throw InvalidInput("dim_reduce_lift: dimension mismatch");
  const auto& at = reduced.A;
  QuadCoeffs out;
  out.A = linalg::symmetrize(noise_matrix.transpose() * at * noise_matrix);
  out.b = noise_matrix.transpose() * reduced.b;
  out.C = 2.0 * noise_matrix.transpose() * at * state_matrix;
  out.D = linalg::symmetrize(state_matrix.transpose() * at * state_matrix);
  out.e = state_matrix.transpose() * reduced.b;
  out.f = reduced.f;
  return out;
}

QuadCoeffs dim_reduce_lift_initial(const QuadCoeffs& reduced, const ConstMatrixRef& noise_matrix) {
  if (reduced.conditioning_dim() != 0 || reduced.proposal_dim() != noise_matrix.rows())
    throw InvalidInput("dim_reduce_lift_initial: dimension mismatch");
  QuadCoeffs out = QuadCoeffs::zero(static_cast<int>(noise_matrix.cols()), 0);
  out.A = linalg::symmetrize(noise_matrix.transpose() * reduced.A * noise_matrix);
  out.b = noise_matrix.transpose() * reduced.b;
  out.f = reduced.f;
  return out;
}

double learning_rate(const ConstMatrixRef& current_A, const ConstMatrixRef& increment_A, double alpha) {
  const auto m = current_A.rows();
  if (current_A.cols() != m || increment_A.rows() != m || increment_A.cols() != m)
    throw InvalidInput("learning_rate: dimension mismatch");
  if (m == 0) return 1.0;
  if (!current_A.allFinite() || !increment_A.allFinite())
    throw PolicyInvariantError("learning_rate: non-finite policy coefficients");
  const Matrix u = linalg::symmetrize(alpha * Matrix::Identity(m, m) + current_A);
  const auto eig = linalg::symeig(u);
  const double scale = std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  if (eig.values(0) < -kInvariantSlack * scale)
    throw PolicyInvariantError("learning_rate: alpha*I + A is not positive definite");
  const double floor = kInvariantSlack * std::numeric_limits<double>::epsilon() * scale;
  const Vector inv_root = eig.values.cwiseMax(floor).cwiseSqrt().cwiseInverse();
  const Matrix m_inv = eig.vectors * inv_root.asDiagonal() * eig.vectors.transpose();
  const Matrix scaled = linalg::symmetrize(m_inv * increment_A * m_inv);
  const double lambda_min = linalg::symeig(scaled).values(0);
  if (1.0 + lambda_min > 0.0) return 1.0;
  return std::min(1.0, (kLearningRateFloor - 1.0) / lambda_min);
}

QuadCoeffs constrained_refine_step(const QuadCoeffs& current, const QuadCoeffs& increment, double alpha,
                                   double* kappa) {
  if (!current.same_shape(increment)) throw InvalidInput("constrained_refine: shape mismatch");
  const double k = learning_rate(current.A, increment.A, alpha);
  QuadCoeffs out = current;
  out.add_scaled(increment, k);
  if (kappa != nullptr) *kappa = k;
  return out;
}

RefinedPolicy constrained_refine(const QuadraticPolicy& current, const QuadraticPolicy& increment, double alpha) {
  if (current.steps.size() != increment.steps.size())
    throw InvalidInput("constrained_refine: horizon mismatch");
  RefinedPolicy out;
  out.policy.steps.reserve(current.steps.size());
  out.learning_rates.reserve(current.steps.size());
  for (std::size_t t = 0; t < current.steps.size(); ++t) {
    double k = 1.0;
    out.policy.steps.push_back(constrained_refine_step(current.steps[t], increment.steps[t], alpha, &k));
    out.learning_rates.push_back(k);
  }
  return out;
}

LqgPolicy optimal_policy_lgssm(const LinearGaussianSpec& spec, const ConstMatrixRef& observations, double lambda) {
  spec.validate();
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("optimal_policy_lgssm: lambda outside [0, 1]");
  if (observations.rows() != spec.obs_dim()) throw InvalidInput("optimal_policy_lgssm: observation dimension");
  const int horizon = static_cast<int>(observations.cols());
  const int d = spec.state_dim();
  const int dn = spec.noise_dim();
  const int dy = spec.obs_dim();
  const Matrix& a = spec.A;
  const Matrix& b = spec.B;
  const Matrix& e = spec.obs_loading;

  const Eigen::LLT<Matrix> f_llt(spec.obs_cov);
  const Matrix f_inv_e = f_llt.solve(e);
  const Matrix obs_quad = 0.5 * e.transpose() * f_inv_e;
  const double obs_const = 0.5 * dy * kLog2Pi + 0.5 * linalg::logdet_spd(spec.obs_cov);

  // λ·β̄_t for t = 1..T (the tempered observation term).
  auto observation_term = [&](int t) {
    QuadCoeffs c = QuadCoeffs::zero(d, 0);
    const Vector r = observations.col(t - 1) - spec.obs_offset;
    c.A = lambda * obs_quad;
    c.b = -lambda * f_inv_e.transpose() * r;
    c.f = lambda * (0.5 * r.dot(f_llt.solve(r)) + obs_const);
    return c;
  };

  LqgPolicy out;
  out.reduced.assign(horizon + 1, QuadCoeffs::zero(d, 0));
  if (horizon >= 1) out.reduced[horizon] = observation_term(horizon);
  const Matrix eye = Matrix::Identity(dn, dn);
  for (int t = horizon - 1; t >= 0; --t) {
    const QuadCoeffs& next = out.reduced[t + 1];
    const Matrix j = b.transpose() * next.A * a;
    const Matrix k_inv = linalg::symmetrize(eye + 2.0 * b.transpose() * next.A * b);
    const Matrix k = linalg::inverse_spd(k_inv);
    const double logdet_k = -linalg::logdet_spd(k_inv);
    const Vector bt_b = b.transpose() * next.b;
    QuadCoeffs cur = t >= 1 ? observation_term(t) : QuadCoeffs::zero(d, 0);
    cur.A = linalg::symmetrize(cur.A + a.transpose() * next.A * a - 2.0 * j.transpose() * k * j);
    cur.b += a.transpose() * next.b - 2.0 * j.transpose() * k * bt_b;
    cur.f += next.f - 0.5 * bt_b.dot(k * bt_b) - 0.5 * logdet_k;
    out.reduced[t] = std::move(cur);
  }
  out.lifted.steps.reserve(horizon + 1);
  out.lifted.steps.push_back(dim_reduce_lift_initial(out.reduced[0], spec.initial_noise_matrix()));
  for (int t = 1; t <= horizon; ++t) out.lifted.steps.push_back(dim_reduce_lift(out.reduced[t], a, b));
  return out;
}

nlohmann::json policy_to_json(const QuadraticPolicy& policy) {
  using json_io::matrix_to_shaped_json;
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& c : policy.steps) {
    steps.push_back({{"A", matrix_to_shaped_json(c.A)},
                     {"b", json_io::vector_to_json(c.b)},
                     {"C", matrix_to_shaped_json(c.C)},
                     {"D", matrix_to_shaped_json(c.D)},
                     {"e", json_io::vector_to_json(c.e)},
                     {"f", c.f}});
  }
  return {{"format", "quadratic-policy"}, {"version", 1}, {"steps", std::move(steps)}};
}

QuadraticPolicy policy_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "quadratic-policy" || j.value("version", 0) != 1)
    throw ConfigError("policy: unsupported format or version");
  QuadraticPolicy p;
  for (const auto& s : j.at("steps")) {
    QuadCoeffs c;
    c.A = json_io::matrix_from_json(s.at("A"), "policy.A");
    c.b = json_io::vector_from_json(s.at("b"), "policy.b");
    c.C = json_io::matrix_from_json(s.at("C"), "policy.C");
    c.D = json_io::matrix_from_json(s.at("D"), "policy.D");
    c.e = json_io::vector_from_json(s.at("e"), "policy.e");
    c.f = s.at("f").get<double>();
    const auto m = c.b.size();
    const auto n = c.e.size();
    if (c.A.rows() != m || c.A.cols() != m || c.C.rows() != m || c.C.cols() != n || c.D.rows() != n ||
        c.D.cols() != n)
      throw ConfigError("policy: inconsistent coefficient shapes");
    p.steps.push_back(std::move(c));
  }
  return p;
}

}  // namespace acsmc
