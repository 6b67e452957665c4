// Exercises the shared library through its C header only.
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "acsmc.h"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const char* kModel = R"({"family": "lgssm", "A": [[0.8, 0.1], [0.0, 0.6]], "B": [[0.5, 0.0], [0.0, 0.4]],
  "obs_offset": [0.2], "obs_loading": [[1.0, 0.5]], "obs_cov": [[0.3]]})";

struct ModelHandle {
  acsmc_model* ptr = nullptr;
  ~ModelHandle() { acsmc_model_free(ptr); }
};

}  // namespace

TEST_CASE("version and options") {
  REQUIRE(acsmc_version() != nullptr);
  CHECK(std::strlen(acsmc_version()) > 0);
  acsmc_run_options o;
  std::memset(&o, 0x5a, sizeof o);
  acsmc_run_options_init(&o);
  CHECK(o.has_seed == 0);
  CHECK(o.out == nullptr);
  CHECK(o.resume == nullptr);
  CHECK(o.method == nullptr);
  CHECK(o.threads < 1);
  CHECK(o.reps < 1);
  CHECK(o.max_iterations < 0);
  acsmc_run_options_init(nullptr);
  acsmc_string_free(nullptr);
}

TEST_CASE("model handle round trip") {
  ModelHandle m;
  REQUIRE(acsmc_model_create(kModel, &m.ptr) == ACSMC_OK);
  int d = 0, dn = 0, dy = 0;
  REQUIRE(acsmc_model_dims(m.ptr, &d, &dn, &dy) == ACSMC_OK);
  CHECK(d == 2);
  CHECK(dn == 2);
  CHECK(dy == 1);

  const int horizon = 40;
  std::vector<double> y(horizon), y2(horizon);
  REQUIRE(acsmc_model_simulate(m.ptr, horizon, 3, y.data()) == ACSMC_OK);
  REQUIRE(acsmc_model_simulate(m.ptr, horizon, 3, y2.data()) == ACSMC_OK);
  CHECK(y == y2);

  double exact = 0.0, bpf = 0.0, ac = 0.0, again = 0.0;
  REQUIRE(acsmc_model_log_likelihood(m.ptr, y.data(), horizon, "kalman", 0, 1.0, 0, 0, &exact) == ACSMC_OK);
  REQUIRE(acsmc_model_log_likelihood(m.ptr, y.data(), horizon, "bpf", 2000, 1.0, 0, 1, &bpf) == ACSMC_OK);
  REQUIRE(acsmc_model_log_likelihood(m.ptr, y.data(), horizon, "acsmc", 128, 1.0, 3, 1, &ac) == ACSMC_OK);
  REQUIRE(acsmc_model_log_likelihood(m.ptr, y.data(), horizon, "acsmc", 128, 1.0, 3, 1, &again) == ACSMC_OK);
  CHECK(std::isfinite(exact));
  CHECK(std::abs(bpf - exact) < 0.5);
  CHECK(std::abs(ac - exact) < 0.05);
  CHECK(ac == again);
}

TEST_CASE("errors map to status codes") {
  acsmc_model* m = nullptr;
  CHECK(acsmc_model_create("{not json", &m) == ACSMC_ERR_CONFIG);
  CHECK(m == nullptr);
  CHECK(std::strlen(acsmc_last_error()) > 0);
  CHECK(acsmc_model_create(R"({"family": "lgssm"})", &m) == ACSMC_ERR_CONFIG);
  CHECK(std::string(acsmc_last_error()).find("model.A") != std::string::npos);
  CHECK(acsmc_model_create(nullptr, &m) == ACSMC_ERR_ARGUMENT);
  CHECK(acsmc_model_create(kModel, nullptr) == ACSMC_ERR_ARGUMENT);

  ModelHandle h;
  REQUIRE(acsmc_model_create(kModel, &h.ptr) == ACSMC_OK);
  CHECK(std::strlen(acsmc_last_error()) == 0);
  int d = 0;
  CHECK(acsmc_model_dims(nullptr, &d, &d, &d) == ACSMC_ERR_ARGUMENT);
  std::vector<double> y(10, 0.0);
  double out = 0.0;
  CHECK(acsmc_model_simulate(h.ptr, 0, 1, y.data()) == ACSMC_ERR_ARGUMENT);
  CHECK(acsmc_model_log_likelihood(h.ptr, y.data(), 10, "magic", 10, 1.0, 0, 1, &out) != ACSMC_OK);
  CHECK(acsmc_model_log_likelihood(h.ptr, y.data(), 10, "bpf", 0, 1.0, 0, 1, &out) == ACSMC_ERR_ARGUMENT);
  CHECK(acsmc_model_log_likelihood(h.ptr, y.data(), 10, "bpf", 10, 2.0, 0, 1, &out) == ACSMC_ERR_ARGUMENT);
  CHECK(acsmc_model_log_likelihood(h.ptr, nullptr, 10, "bpf", 10, 1.0, 0, 1, &out) == ACSMC_ERR_ARGUMENT);

  // Observations that overflow every weight are a numerical failure.
  std::vector<double> wild(10, 1e300);
  CHECK(acsmc_model_log_likelihood(h.ptr, wild.data(), 10, "bpf", 10, 1.0, 0, 1, &out) == ACSMC_ERR_NUMERICAL);
  CHECK(std::strlen(acsmc_last_error()) > 0);
}

TEST_CASE("config commands") {
  const auto dir = fs::temp_directory_path() / "acsmc_test_capi";
  fs::remove_all(dir);
  fs::create_directories(dir);
  char* report = nullptr;
  acsmc_run_options o;
  acsmc_run_options_init(&o);

  const auto missing = (dir / "nope.json").string();
  CHECK(acsmc_cmd_likelihood(missing.c_str(), &o, &report) == ACSMC_ERR_CONFIG);
  CHECK(report == nullptr);
  CHECK(acsmc_cmd_likelihood(nullptr, &o, &report) == ACSMC_ERR_ARGUMENT);

  const auto cfg = (dir / "lik.json").string();
  std::ofstream(cfg) << R"({"seed": 2, "model": )" << kModel
                     << R"(, "data": {"T": 20}, "likelihood": {"method": "bpf", "particles": 100, "reps": 3}})";
  REQUIRE(acsmc_cmd_likelihood(cfg.c_str(), &o, &report) == ACSMC_OK);
  REQUIRE(report != nullptr);
  const std::string first = report;
  acsmc_string_free(report);
  CHECK(first.find("bpf,100,3,") != std::string::npos);

  o.has_seed = 1;
  o.seed = 2;
  REQUIRE(acsmc_cmd_likelihood(cfg.c_str(), &o, &report) == ACSMC_OK);
  CHECK(first == report);
  acsmc_string_free(report);

  const auto sim = (dir / "sim.json").string();
  const auto data = (dir / "y.csv").string();
  std::ofstream(sim) << R"({"seed": 2, "model": )" << kModel << R"(, "simulate": {"T": 15}})";
  o.out = data.c_str();
  REQUIRE(acsmc_cmd_simulate(sim.c_str(), &o, &report) == ACSMC_OK);
  acsmc_string_free(report);
  CHECK(fs::exists(data));

  const auto bad = (dir / "bad.json").string();
  std::ofstream(bad) << R"({"seed": 2, "model": )" << kModel << R"(, "simulate": {"T": 15, "me_fraction": 0}})";
  CHECK(acsmc_cmd_simulate(bad.c_str(), &o, &report) == ACSMC_ERR_CONFIG);
  CHECK(std::string(acsmc_last_error()).find("me_fraction") != std::string::npos);
}
