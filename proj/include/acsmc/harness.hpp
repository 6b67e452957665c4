#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "acsmc/annealing.hpp"
#include "acsmc/model.hpp"

namespace acsmc::harness {

using nlohmann::json;

/// Command-line overrides. Unset fields fall back to the config file.
struct RunOptions {
  std::optional<std::uint64_t> seed;
  int threads = 0;            // < 1: config value, else 1
  std::string out;            // output path or prefix; empty prints only the report
  std::string resume;         // checkpoint to continue from (infer)
  std::string method;         // restrict the likelihood runs to one method
  int reps = -1;              // override the replication count
  int max_iterations = -1;    // stop infer after this many annealing iterations
};

/// One log-likelihood estimate. `method` is bpf, csmc, acsmc or kalman;
/// `ladder` is used by acsmc (its last value is the target temperature) and
/// ignored otherwise.
double estimate_log_likelihood(const StateSpaceModel& model, const json& model_json, const ConstMatrixRef& observations,
                               const std::string& method, int particles, double lambda,
                               const TemperatureLadder& ladder, Rng& rng);

/// Config file with "model", "data" and command sections. Returns the text
/// meant for stdout: the summary CSV (likelihood), a short report (simulate)
/// or the posterior summary JSON (infer).
std::string cmd_likelihood(const std::string& config_path, const RunOptions& options);
std::string cmd_simulate(const std::string& config_path, const RunOptions& options);
std::string cmd_infer(const std::string& config_path, const RunOptions& options);

/// Same as above with an in-memory config; relative data paths resolve against `base_dir`.
std::string run_likelihood(const json& config, const std::string& base_dir, const RunOptions& options);
std::string run_simulate(const json& config, const std::string& base_dir, const RunOptions& options);
std::string run_infer(const json& config, const std::string& base_dir, const RunOptions& options);

/// Hash of everything that determines results: the config minus run-control
/// keys (threads, infer.max_iterations) plus the bytes of any data file.
std::string config_hash(const json& config, const std::string& base_dir);

json load_config(const std::string& path);

}  // namespace acsmc::harness
