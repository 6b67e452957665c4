#include "acsmc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "acsmc/error.hpp"
#include "acsmc/json_io.hpp"
#include "acsmc/models.hpp"

namespace acsmc::config {

namespace {

struct Reference {
  std::string name;
  bool negate = false;
  bool square = false;
};

std::optional<Reference> parse_reference(const std::string& s) {
  Reference r;
  std::string_view v = s;
  if (!v.empty() && v.front() == '-') {
    r.negate = true;
    v.remove_prefix(1);
  }
  if (v.empty() || v.front() != '$') return std::nullopt;
  v.remove_prefix(1);
  if (v.size() > 2 && v.substr(v.size() - 2) == "^2") {
    r.square = true;
    v.remove_suffix(2);
  }
  if (v.empty()) return std::nullopt;
  r.name = std::string(v);
  return r;
}

void collect(const json& node, std::set<std::string>& out) {
  if (node.is_string()) {
    if (auto r = parse_reference(node.get<std::string>())) out.insert(r->name);
  } else if (node.is_structured()) {
    for (const auto& child : node) collect(child, out);
  }
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(path + "." + key + ": missing field");
  return *it;
}

double number(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = field(obj, key, path);
  if (v.is_string()) throw ConfigError(path + "." + key + ": unresolved parameter reference " + v.get<std::string>());
  if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& path) {
  return obj.contains(key) ? number(obj, key, path) : fallback;
}

void check_no_references(const json& node, const std::string& path) {
  std::set<std::string> refs;
  collect(node, refs);
  if (!refs.empty()) throw ConfigError(path + ": unresolved parameter reference $" + *refs.begin());
}

Matrix matrix(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = field(obj, key, path);
  check_no_references(v, path + "." + key);
  return json_io::matrix_from_json(v, path + "." + key);
}

Vector vector(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = field(obj, key, path);
  check_no_references(v, path + "." + key);
  return json_io::vector_from_json(v, path + "." + key);
}

LinearGaussianSpec lgssm_spec(const json& m) {
  LinearGaussianSpec s;
  s.A = matrix(m, "A", "model");
  s.B = matrix(m, "B", "model");
  if (m.contains("B0")) s.B0 = matrix(m, "B0", "model");
  s.obs_offset = vector(m, "obs_offset", "model");
  s.obs_loading = matrix(m, "obs_loading", "model");
  s.obs_cov = matrix(m, "obs_cov", "model");
  return s;
}

QuadraticSsmSpec quadratic_spec(const json& m) {
  QuadraticSsmSpec s;
  s.L1 = matrix(m, "L1", "model");
  s.L2 = matrix(m, "L2", "model");
  s.constant = vector(m, "constant", "model");
  if (m.contains("quad")) {
    const auto& q = m.at("quad");
    if (!q.is_array()) throw ConfigError("model.quad: expected an array of matrices");
    for (std::size_t i = 0; i < q.size(); ++i) {
      check_no_references(q[i], "model.quad[" + std::to_string(i) + "]");
      s.quad.push_back(json_io::matrix_from_json(q[i], "model.quad[" + std::to_string(i) + "]"));
    }
  }
  s.rho = matrix(m, "rho", "model");
  s.sigma = matrix(m, "sigma", "model");
  s.obs_offset = vector(m, "obs_offset", "model");
  s.obs_loading = matrix(m, "obs_loading", "model");
  s.obs_cov = matrix(m, "obs_cov", "model");
  return s;
}

LrrSpec lrr_spec(const json& m) {
  LrrSpec s;
  const std::string p = "model";
  s.delta = number_or(m, "delta", s.delta, p);
  s.gamma = number_or(m, "gamma", s.gamma, p);
  s.psi = number_or(m, "psi", s.psi, p);
  s.mu = number_or(m, "mu", s.mu, p);
  s.rho = number_or(m, "rho", s.rho, p);
  s.phi_x = number_or(m, "phi_x", s.phi_x, p);
  s.vol.nu = number_or(m, "nu", s.vol.nu, p);
  s.vol.shape = number_or(m, "phi_s", s.vol.shape, p);
  s.vol.scale = number_or(m, "c", s.vol.scale, p);
  s.mu_d = number_or(m, "mu_d", s.mu_d, p);
  s.Phi = number_or(m, "Phi", s.Phi, p);
  s.phi_dc = number_or(m, "phi_dc", s.phi_dc, p);
  s.phi_d = number_or(m, "phi_d", s.phi_d, p);
  s.phi_m = number_or(m, "phi_m", s.phi_m, p);
  s.phi_r = number_or(m, "phi_r", s.phi_r, p);
  if (m.contains("pricing")) {
    const auto& c = m.at("pricing");
    const std::string q = "model.pricing";
    auto& a = s.pricing;
    a.m0 = number_or(c, "m0", a.m0, q);
    a.m_xprev = number_or(c, "m_xprev", a.m_xprev, q);
    a.m_vprev = number_or(c, "m_vprev", a.m_vprev, q);
    a.m_x = number_or(c, "m_x", a.m_x, q);
    a.m_v = number_or(c, "m_v", a.m_v, q);
    a.m_d = number_or(c, "m_d", a.m_d, q);
    a.r0 = number_or(c, "r0", a.r0, q);
    a.r_x = number_or(c, "r_x", a.r_x, q);
    a.r_v = number_or(c, "r_v", a.r_v, q);
  }
  return s;
}

std::string family_of(const json& m) {
  const auto& f = field(m, "family", "model");
  if (!f.is_string()) throw ConfigError("model.family: expected a string");
  return f.get<std::string>();
}

bool gaussian_observation_family(const std::string& f) { return f == "lgssm" || f == "quadratic"; }

}  // namespace

std::unique_ptr<StateSpaceModel> build_model(const json& model) {
  const auto f = family_of(model);
  if (f == "lgssm") return std::make_unique<LinearGaussianModel>(lgssm_spec(model));
  if (f == "quadratic") return std::make_unique<QuadraticSsm>(quadratic_spec(model));
  if (f == "lrr") return std::make_unique<LrrModel>(lrr_spec(model));
  throw ConfigError("model.family: unknown family '" + f + "' (expected lgssm, quadratic or lrr)");
}

json substitute(const json& node, const std::map<std::string, double>& values) {
  if (node.is_string()) {
    const auto r = parse_reference(node.get<std::string>());
    if (!r) return node;
    auto it = values.find(r->name);
    if (it == values.end()) throw ConfigError("unknown parameter reference $" + r->name);
    double v = r->square ? it->second * it->second : it->second;
    return r->negate ? -v : v;
  }
  if (node.is_array()) {
    json out = json::array();
    for (const auto& child : node) out.push_back(substitute(child, values));
    return out;
  }
  if (node.is_object()) {
    json out = json::object();
    for (const auto& [k, child] : node.items()) out[k] = substitute(child, values);
    return out;
  }
  return node;
}

std::vector<std::string> referenced_parameters(const json& node) {
  std::set<std::string> refs;
  collect(node, refs);
  return {refs.begin(), refs.end()};
}

std::optional<LinearGaussianSpec> linear_gaussian_spec(const json& model) {
  const auto f = family_of(model);
  if (f == "lgssm") return lgssm_spec(model);
  if (f == "quadratic") {
    const auto s = quadratic_spec(model);
    if (s.constant.size() > 0 && s.constant.cwiseAbs().maxCoeff() != 0.0) return std::nullopt;
    for (const auto& q : s.quad)
      if (q.size() > 0 && q.cwiseAbs().maxCoeff() != 0.0) return std::nullopt;
    return s.linear_part();
  }
  return std::nullopt;
}

Prior parse_prior(const json& prior) {
  if (!prior.is_array() || prior.empty()) throw ConfigError("infer.prior: expected a non-empty array");
  std::vector<PriorComponent> comps;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < prior.size(); ++i) {
    const auto& e = prior[i];
    const std::string path = "infer.prior[" + std::to_string(i) + "]";
    PriorComponent c;
    const auto& name = field(e, "name", path);
    if (!name.is_string() || name.get<std::string>().empty()) throw ConfigError(path + ".name: expected a string");
    c.name = name.get<std::string>();
    if (!seen.insert(c.name).second) throw ConfigError(path + ".name: duplicate parameter " + c.name);
    const auto& fam = field(e, "family", path);
    const std::string f = fam.is_string() ? fam.get<std::string>() : "";
    if (f == "normal") {
      c.family = PriorComponent::Family::Normal;
      c.mean = number(e, "mean", path);
      c.sd = number(e, "sd", path);
    } else if (f == "truncated_normal") {
      c.family = PriorComponent::Family::TruncatedNormal;
      c.mean = number(e, "mean", path);
      c.sd = number(e, "sd", path);
      c.lower = number_or(e, "lower", c.lower, path);
      c.upper = number_or(e, "upper", c.upper, path);
    } else if (f == "uniform") {
      c.family = PriorComponent::Family::Uniform;
      c.lower = number(e, "lower", path);
      c.upper = number(e, "upper", path);
    } else {
      throw ConfigError(path + ".family: expected normal, truncated_normal or uniform");
    }
    try {
      c.validate();
    } catch (const ConfigError& err) {
      throw ConfigError(path + ": " + err.what());
    }
    comps.push_back(std::move(c));
  }
  return Prior(std::move(comps));
}

ModelFactory make_factory(json model_template, const Prior& prior) {
  const auto names = prior.names();
  for (const auto& ref : referenced_parameters(model_template))
    if (std::find(names.begin(), names.end(), ref) == names.end())
      throw ConfigError("model: parameter $" + ref + " has no prior");
  return [tmpl = std::move(model_template), names](const Vector& theta) {
    std::map<std::string, double> values;
    for (std::size_t i = 0; i < names.size(); ++i) values[names[i]] = theta(static_cast<Eigen::Index>(i));
    return build_model(substitute(tmpl, values));
  };
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

SimulatedData simulate_dataset(const json& model, int horizon, std::optional<double> me_fraction, std::uint64_t seed) {
  if (horizon < 1) throw ConfigError("simulate.T: must be at least 1");
  check_no_references(model, "model");
  const auto f = family_of(model);
  json resolved = model;
  if (me_fraction) {
    if (!gaussian_observation_family(f))
      throw ConfigError("simulate.me_fraction: measurement-error scaling needs a Gaussian observation model");
    if (!(*me_fraction > 0.0) || !std::isfinite(*me_fraction))
      throw ConfigError("simulate.me_fraction: must be positive (zero measurement error is not allowed)");
    // Placeholder so the model can be built; replaced below.
    const auto dy = vector(model, "obs_offset", "model").size();
    resolved["obs_cov"] = json_io::matrix_to_json(Matrix::Identity(dy, dy));
  }
  SimulatedData out;
  auto m = build_model(resolved);
  Rng rng(seed, {0});
  auto sim = simulate(*m, horizon, rng);
  const auto& states = sim.trajectory.states;
  out.data.states = states.rightCols(horizon);
  if (!me_fraction) {
    out.data.observations = sim.observations;
    out.resolved_model = resolved;
    return out;
  }
  const Vector offset = vector(model, "obs_offset", "model");
  const Matrix loading = matrix(model, "obs_loading", "model");
  const Matrix noiseless = (loading * out.data.states).colwise() + offset;
  const auto dy = noiseless.rows();
  Vector sd(dy);
  for (Eigen::Index i = 0; i < dy; ++i) {
    const double mean = noiseless.row(i).mean();
    const double ss = (noiseless.row(i).array() - mean).square().sum();
    sd(i) = horizon > 1 ? std::sqrt(ss / (horizon - 1)) : 0.0;
    if (!(sd(i) > 0.0)) throw InvalidInput("simulate: noiseless series " + std::to_string(i) + " has zero variance");
  }
  const Vector me_sd = *me_fraction * sd;
  Rng noise_rng(seed, {1});
  out.data.observations = noiseless;
  for (int t = 0; t < horizon; ++t)
    for (Eigen::Index i = 0; i < dy; ++i) out.data.observations(i, t) += me_sd(i) * noise_rng.normal();
  resolved["obs_cov"] = json_io::matrix_to_json(Matrix(me_sd.array().square().matrix().asDiagonal()));
  out.resolved_model = resolved;
  return out;
}

void write_dataset(const std::string& path, const Dataset& data,
                   const std::vector<std::pair<std::string, std::string>>& meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write dataset file " + path);
  const auto horizon = data.observations.cols();
  const auto dy = data.observations.rows();
  const bool with_states = data.states.size() > 0;
  os << "# T: " << horizon << "\n# d_y: " << dy << "\n";
  if (with_states) os << "# d_state: " << data.states.rows() << "\n";
  for (const auto& [k, v] : meta) os << "# " << k << ": " << v << "\n";
  os << "t";
  for (Eigen::Index i = 0; i < dy; ++i) os << ",y" << i + 1;
  if (with_states)
    for (Eigen::Index i = 0; i < data.states.rows(); ++i) os << ",s" << i + 1;
  os << "\n";
  for (Eigen::Index t = 0; t < horizon; ++t) {
    os << t + 1;
    for (Eigen::Index i = 0; i < dy; ++i) os << "," << format_number(data.observations(i, t));
    if (with_states)
      for (Eigen::Index i = 0; i < data.states.rows(); ++i) os << "," << format_number(data.states(i, t));
    os << "\n";
  }
  if (!os) throw IoError("failed writing dataset file " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("data.file: cannot open " + path);
  long horizon = -1, dy = -1;
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      auto key = line.substr(1, colon - 1);
      key.erase(0, key.find_first_not_of(' '));
      const auto value = line.substr(colon + 1);
      try {
        if (key == "T") horizon = std::stol(value);
        if (key == "d_y") dy = std::stol(value);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed header value");
      }
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (header.empty()) {
      header = cells;
      continue;
    }
    if (cells.size() != header.size())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) + " columns");
    std::vector<double> row;
    for (const auto& c : cells) {
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size())
        throw ConfigError(path + ":" + std::to_string(lineno) + ": not a number: '" + c + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (header.empty()) throw ConfigError(path + ": missing column header row");
  // Observation columns are y1..y_{d_y}; without a d_y header every y-column counts.
  std::vector<std::size_t> ycols;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i].size() > 1 && header[i][0] == 'y') ycols.push_back(i);
  if (dy >= 0) {
    if (static_cast<long>(ycols.size()) < dy) throw ConfigError(path + ": fewer y-columns than d_y");
    ycols.resize(static_cast<std::size_t>(dy));
  }
  if (ycols.empty()) throw ConfigError(path + ": no observation columns (y1, y2, ...)");
  if (horizon >= 0 && static_cast<long>(rows.size()) != horizon)
    throw ConfigError(path + ": header says T = " + std::to_string(horizon) + " but found " +
                      std::to_string(rows.size()) + " rows");
  if (rows.empty()) throw ConfigError(path + ": no data rows");
  Dataset d;
  d.observations.resize(static_cast<Eigen::Index>(ycols.size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t i = 0; i < ycols.size(); ++i) d.observations(i, t) = rows[t][ycols[i]];
  return d;
}

}  // namespace acsmc::config
