#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "acsmc/kalman.hpp"
#include "acsmc/model.hpp"
#include "acsmc/smc2.hpp"

namespace acsmc::config {

using nlohmann::json;

/// Model description format (all matrices row-major nested arrays; a scalar
/// stands for a 1 × 1 matrix and a flat array for a column):
///
///   {"family": "lgssm", "A", "B", "B0"?, "obs_offset", "obs_loading", "obs_cov"}
///   {"family": "quadratic", "L1", "L2", "constant", "quad"?, "rho", "sigma",
///    "obs_offset", "obs_loading", "obs_cov"}
///   {"family": "lrr", "delta", "gamma", "psi", "mu", "rho", "phi_x", "nu",
///    "phi_s", "c", "mu_d", "Phi", "phi_dc", "phi_d", "phi_m", "phi_r",
///    "pricing"?: {"m0", "m_xprev", "m_vprev", "m_x", "m_v", "m_d", "r0", "r_x", "r_v"}}
///
/// Inside a model any number may be written "$name", "-$name" or "$name^2"
/// to refer to an estimated parameter.
///
/// Structural problems (missing field, wrong type) raise ConfigError; values
/// outside the model's support raise InvalidInput.
std::unique_ptr<StateSpaceModel> build_model(const json& model);

/// Replaces parameter references by values. Unknown names raise ConfigError.
json substitute(const json& node, const std::map<std::string, double>& values);

/// Names referenced by "$name" strings, sorted and unique.
std::vector<std::string> referenced_parameters(const json& node);

/// The linear-Gaussian structure of an lgssm model, or of a quadratic model
/// whose constant and quadratic terms vanish.
std::optional<LinearGaussianSpec> linear_gaussian_spec(const json& model);

/// [{"name", "family": "normal" | "truncated_normal" | "uniform", "mean", "sd", "lower", "upper"}]
Prior parse_prior(const json& prior);

/// θ ↦ model for a template whose references are all covered by the prior.
ModelFactory make_factory(json model_template, const Prior& prior);

/// 64-bit FNV-1a, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

struct Dataset {
  Matrix observations;  // d_y × T
  Matrix states;        // d × T (s_1..s_T); empty when not recorded
};

/// Simulated data, optionally with measurement error set to `me_fraction` times
/// the per-series sample standard deviation of the noiseless observations
/// d + E s_t. `resolved_model` is the model the data came from, with the
/// measurement-error covariance filled in.
struct SimulatedData {
  Dataset data;
  json resolved_model;
};
SimulatedData simulate_dataset(const json& model, int horizon, std::optional<double> me_fraction, std::uint64_t seed);

/// CSV: "#"-prefixed header lines (T, d_y, extra key: value pairs), a column
/// name row, then one row per time step.
void write_dataset(const std::string& path, const Dataset& data, const std::vector<std::pair<std::string, std::string>>& meta);
Dataset read_dataset(const std::string& path);

/// Shortest round-trip decimal text for a double.
std::string format_number(double v);

}  // namespace acsmc::config
