#include "acsmc.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "acsmc/annealing.hpp"
#include "acsmc/config.hpp"
#include "acsmc/error.hpp"
#include "acsmc/harness.hpp"

struct acsmc_model {
  nlohmann::json description;
  std::unique_ptr<acsmc::StateSpaceModel> model;
};

namespace {

thread_local std::string last_error;

acsmc_status fail(acsmc_status code, const std::string& msg) {
  last_error = msg;
  return code;
}

// Runs fn and maps library exceptions to status codes.
template <class Fn>
acsmc_status guarded(Fn&& fn) {
  last_error.clear();
  try {
    fn();
    return ACSMC_OK;
  } catch (const acsmc::ConfigError& e) {
    return fail(ACSMC_ERR_CONFIG, e.what());
  } catch (const acsmc::IoError& e) {
    return fail(ACSMC_ERR_IO, e.what());
  } catch (const acsmc::InvalidInput& e) {
    return fail(ACSMC_ERR_ARGUMENT, e.what());
  } catch (const acsmc::StageFailure& e) {
    return fail(ACSMC_ERR_NUMERICAL, std::string("numerical failure at annealing ") + e.what());
  } catch (const acsmc::Error& e) {
    return fail(ACSMC_ERR_NUMERICAL, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(ACSMC_ERR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return fail(ACSMC_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(ACSMC_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(ACSMC_ERR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

acsmc::harness::RunOptions to_options(const acsmc_run_options* o) {
  acsmc::harness::RunOptions r;
  if (o == nullptr) return r;
  if (o->has_seed) r.seed = o->seed;
  r.threads = o->threads;
  if (o->out) r.out = o->out;
  if (o->resume) r.resume = o->resume;
  if (o->method) r.method = o->method;
  r.reps = o->reps;
  r.max_iterations = o->max_iterations;
  return r;
}

template <class Cmd>
acsmc_status run_command(Cmd cmd, const char* config_path, const acsmc_run_options* options, char** report) {
  if (config_path == nullptr || report == nullptr) return fail(ACSMC_ERR_ARGUMENT, "null argument");
  *report = nullptr;
  return guarded([&] { *report = copy_string(cmd(config_path, to_options(options))); });
}

}  // namespace

extern "C" {

const char* acsmc_version(void) { return "1.0.0"; }

const char* acsmc_last_error(void) { return last_error.c_str(); }

void acsmc_string_free(char* s) { std::free(s); }

void acsmc_run_options_init(acsmc_run_options* options) {
  if (options == nullptr) return;
  *options = acsmc_run_options{};
  options->max_iterations = -1;
}

acsmc_status acsmc_model_create(const char* model_json, acsmc_model** out) {
  if (model_json == nullptr || out == nullptr) return fail(ACSMC_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto h = std::make_unique<acsmc_model>();
    h->description = nlohmann::json::parse(model_json);
    h->model = acsmc::config::build_model(h->description);
    *out = h.release();
  });
}

void acsmc_model_free(acsmc_model* model) { delete model; }

acsmc_status acsmc_model_dims(const acsmc_model* model, int* state_dim, int* noise_dim, int* obs_dim) {
  if (model == nullptr) return fail(ACSMC_ERR_ARGUMENT, "null model");
  return guarded([&] {
    const auto d = model->model->dims();
    if (state_dim) *state_dim = d.state;
    if (noise_dim) *noise_dim = d.noise;
    if (obs_dim) *obs_dim = d.obs;
  });
}

acsmc_status acsmc_model_simulate(const acsmc_model* model, int horizon, uint64_t seed, double* observations) {
  if (model == nullptr || observations == nullptr) return fail(ACSMC_ERR_ARGUMENT, "null argument");
  if (horizon < 1) return fail(ACSMC_ERR_ARGUMENT, "horizon must be positive");
  return guarded([&] {
    acsmc::Rng rng(seed);
    const auto sim = acsmc::simulate(*model->model, horizon, rng);
    std::memcpy(observations, sim.observations.data(), sizeof(double) * sim.observations.size());
  });
}

acsmc_status acsmc_model_log_likelihood(const acsmc_model* model, const double* observations, int horizon,
                                        const char* method, int particles, double lambda, int ladder_steps,
                                        uint64_t seed, double* out) {
  if (model == nullptr || observations == nullptr || method == nullptr || out == nullptr)
    return fail(ACSMC_ERR_ARGUMENT, "null argument");
  if (horizon < 1) return fail(ACSMC_ERR_ARGUMENT, "horizon must be positive");
  return guarded([&] {
    const int dy = model->model->dims().obs;
    const acsmc::Matrix y = Eigen::Map<const acsmc::Matrix>(observations, dy, horizon);
    acsmc::TemperatureLadder ladder;
    if (std::string(method) == "acsmc") {
      if (ladder_steps < 2) throw acsmc::InvalidInput("ladder_steps must be at least 2");
      ladder.values.clear();
      for (int k = 0; k < ladder_steps; ++k)
        ladder.values.push_back(k + 1 == ladder_steps ? lambda : lambda * k / (ladder_steps - 1));
    }
    acsmc::Rng rng(seed);
    *out = acsmc::harness::estimate_log_likelihood(*model->model, model->description, y, method, particles, lambda,
                                                   ladder, rng);
  });
}

acsmc_status acsmc_cmd_likelihood(const char* config_path, const acsmc_run_options* options, char** report) {
  return run_command(acsmc::harness::cmd_likelihood, config_path, options, report);
}

acsmc_status acsmc_cmd_simulate(const char* config_path, const acsmc_run_options* options, char** report) {
  return run_command(acsmc::harness::cmd_simulate, config_path, options, report);
}

acsmc_status acsmc_cmd_infer(const char* config_path, const acsmc_run_options* options, char** report) {
  return run_command(acsmc::harness::cmd_infer, config_path, options, report);
}

}  // extern "C"
