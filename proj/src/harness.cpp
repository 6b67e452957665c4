#include "acsmc/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "acsmc/config.hpp"
#include "acsmc/error.hpp"
#include "acsmc/json_io.hpp"
#include "acsmc/kalman.hpp"
#include "acsmc/parallel.hpp"
#include "acsmc/smc.hpp"
#include "acsmc/smc2.hpp"

namespace acsmc::harness {

namespace fs = std::filesystem;
using config::format_number;

namespace {

constexpr std::uint64_t kLikelihoodStream = 100;

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    os << text;
    if (!os) throw IoError("failed writing " + path);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot write " + path + ": " + ec.message());
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / path).string();
}

const json& section(const json& cfg, const std::string& key) {
  auto it = cfg.find(key);
  if (it == cfg.end() || !it->is_object()) throw ConfigError(key + ": missing section");
  return *it;
}

template <class T>
T get_or(const json& obj, const std::string& key, T fallback, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

std::uint64_t effective_seed(const json& cfg, const RunOptions& options) {
  if (options.seed) return *options.seed;
  return get_or<std::uint64_t>(cfg, "seed", 0, "config");
}

int effective_threads(const json& cfg, const RunOptions& options) {
  if (options.threads >= 1) return options.threads;
  return std::max(1, get_or<int>(cfg, "threads", 1, "config"));
}

std::map<std::string, double> fixed_parameters(const json& cfg) {
  std::map<std::string, double> values;
  auto it = cfg.find("parameters");
  if (it == cfg.end()) return values;
  if (!it->is_object()) throw ConfigError("parameters: expected an object of name: value pairs");
  for (const auto& [k, v] : it->items()) {
    if (!v.is_number()) throw ConfigError("parameters." + k + ": expected a number");
    values[k] = v.get<double>();
  }
  return values;
}

std::string csv_header(const std::string& hash, std::uint64_t seed) {
  return "# config_hash=" + hash + " seed=" + std::to_string(seed) + "\n";
}

std::string strip_suffix(std::string s, const std::string& suffix) {
  if (s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0)
    s.resize(s.size() - suffix.size());
  return s;
}

struct Data {
  Matrix observations;
  json model;  // model with any measurement-error covariance filled in
};

/// Observations from data.file, or simulated from the model with
/// data.{T, me_fraction, seed} and the fixed "parameters".
Data load_data(const json& cfg, const std::string& base_dir, std::uint64_t seed) {
  const auto& d = section(cfg, "data");
  json model = section(cfg, "model");
  Data out;
  if (d.contains("file")) {
    if (!d.at("file").is_string()) throw ConfigError("data.file: expected a path");
    out.observations = config::read_dataset(resolve_path(base_dir, d.at("file").get<std::string>())).observations;
    out.model = std::move(model);
    return out;
  }
  if (!d.contains("T")) throw ConfigError("data: needs either file or T");
  const int horizon = get_or<int>(d, "T", 0, "data");
  std::optional<double> me;
  if (d.contains("me_fraction")) me = get_or<double>(d, "me_fraction", 0.0, "data");
  const auto data_seed = get_or<std::uint64_t>(d, "seed", seed, "data");
  const auto truth = config::substitute(model, fixed_parameters(cfg));
  auto sim = config::simulate_dataset(truth, horizon, me, data_seed);
  out.observations = std::move(sim.data.observations);
  if (me) model["obs_cov"] = sim.resolved_model.at("obs_cov");
  out.model = std::move(model);
  return out;
}

struct MethodRun {
  std::string method;
  int particles = 0;
  TemperatureLadder ladder;
};

TemperatureLadder ladder_from(const json& entry, const json& defaults, double lambda, const std::string& path) {
  TemperatureLadder l;
  const json* src = entry.contains("ladder") || entry.contains("ladder_steps") ? &entry : &defaults;
  if (src->contains("ladder")) {
    l.values = get_or<std::vector<double>>(*src, "ladder", {}, path);
    try {
      l.validate();
    } catch (const InvalidInput& e) {
      throw ConfigError(path + ".ladder: " + e.what());
    }
    return l;
  }
  const int steps = get_or<int>(*src, "ladder_steps", 5, path);
  if (steps < 2) throw ConfigError(path + ".ladder_steps: must be at least 2");
  l.values.clear();
  for (int k = 0; k < steps; ++k) l.values.push_back(k + 1 == steps ? lambda : lambda * k / (steps - 1));
  return l;
}

std::vector<MethodRun> method_runs(const json& lik, double lambda, const RunOptions& options) {
  std::vector<MethodRun> runs;
  auto add = [&](const json& e, const std::string& path) {
    MethodRun r;
    r.method = get_or<std::string>(e, "method", "", path);
    if (r.method != "bpf" && r.method != "csmc" && r.method != "acsmc" && r.method != "kalman")
      throw ConfigError(path + ".method: expected bpf, csmc, acsmc or kalman");
    r.particles = get_or<int>(e, "particles", get_or<int>(lik, "particles", 0, "likelihood"), path);
    if (r.method != "kalman" && r.particles < 1) throw ConfigError(path + ".particles: must be positive");
    r.ladder = ladder_from(e, lik, lambda, path);
    runs.push_back(std::move(r));
  };
  if (lik.contains("methods")) {
    const auto& m = lik.at("methods");
    if (!m.is_array()) throw ConfigError("likelihood.methods: expected an array");
    for (std::size_t i = 0; i < m.size(); ++i) add(m[i], "likelihood.methods[" + std::to_string(i) + "]");
  } else if (lik.contains("method")) {
    add(lik, "likelihood");
  }
  if (!options.method.empty()) {
    std::vector<MethodRun> kept;
    for (auto& r : runs)
      if (r.method == options.method) kept.push_back(r);
    if (kept.empty()) {
      json e = {{"method", options.method}};
      add(e, "--method");
      kept.push_back(runs.back());
    }
    runs = std::move(kept);
  }
  if (runs.empty()) throw ConfigError("likelihood: no method given");
  return runs;
}

}  // namespace

json load_config(const std::string& path) {
  const auto text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string config_hash(const json& cfg, const std::string& base_dir) {
  json c = cfg;
  c.erase("threads");
  c.erase("seed");
  if (c.contains("infer") && c["infer"].is_object()) c["infer"].erase("max_iterations");
  std::string bytes = c.dump();
  if (cfg.contains("data") && cfg["data"].is_object() && cfg["data"].contains("file") &&
      cfg["data"]["file"].is_string())
    bytes += read_file(resolve_path(base_dir, cfg["data"]["file"].get<std::string>()));
  return config::fnv1a_hex(bytes);
}

double estimate_log_likelihood(const StateSpaceModel& model, const json& model_json, const ConstMatrixRef& observations,
                               const std::string& method, int particles, double lambda,
                               const TemperatureLadder& ladder, Rng& rng) {
  if (method == "kalman") {
    const auto spec = config::linear_gaussian_spec(model_json);
    if (!spec) throw ConfigError("method kalman needs a linear-Gaussian model");
    return kalman_loglik(*spec, observations, lambda);
  }
  if (method == "bpf") return run_bpf(model, observations, lambda, particles, rng).log_likelihood;
  if (method == "csmc") {
    // Reference path from an independent bootstrap run.
    const auto ref = run_bpf(model, observations, lambda, particles, rng).trajectory;
    return run_conditional_smc(model, observations, lambda, nullptr, particles, ref, rng).log_likelihood;
  }
  if (method == "acsmc") return run_acsmc(model, observations, ladder, particles, rng).output.log_likelihood;
  throw ConfigError("unknown method " + method);
}

namespace {

std::string step_rows(const SmcOutput& out) {
  std::string rows = "t,ess,log_mean_weight\n";
  const auto& ps = out.particles;
  for (std::size_t t = 0; t < ps.ess.size(); ++t)
    rows += std::to_string(t) + "," + format_number(ps.ess[t]) + "," + format_number(ps.log_mean_weights[t]) + "\n";
  return rows;
}

// Replays one replication with its own stream and writes per-step rows, plus
// per-stage rows for acsmc.
void write_diagnostics(const std::string& prefix, const std::string& head, const StateSpaceModel& model,
                       const ConstMatrixRef& observations, const std::string& method, int particles, double lambda,
                       const TemperatureLadder& ladder, Rng rng) {
  const std::string base = prefix + "." + method;
  if (method == "bpf") {
    write_file(base + ".steps.csv", head + step_rows(run_bpf(model, observations, lambda, particles, rng)));
  } else if (method == "csmc") {
    const auto ref = run_bpf(model, observations, lambda, particles, rng).trajectory;
    const auto out = run_conditional_smc(model, observations, lambda, nullptr, particles, ref, rng);
    write_file(base + ".steps.csv", head + step_rows(out));
  } else if (method == "acsmc") {
    const auto res = run_acsmc(model, observations, ladder, particles, rng);
    write_file(base + ".steps.csv", head + step_rows(res.output));
    std::string rows = head + "stage,lambda,log_likelihood,min_ess,min_learning_rate,clipped_targets\n";
    for (const auto& st : res.stages)
      rows += std::to_string(st.stage) + "," + format_number(st.lambda) + "," + format_number(st.log_likelihood) +
              "," + format_number(st.min_ess) + "," + format_number(st.min_learning_rate) + "," +
              std::to_string(st.clipped_targets) + "\n";
    write_file(base + ".stages.csv", rows);
  }
}

}  // namespace

std::string run_likelihood(const json& cfg, const std::string& base_dir, const RunOptions& options) {
  const auto seed = effective_seed(cfg, options);
  const int threads = effective_threads(cfg, options);
  const auto hash = config_hash(cfg, base_dir);
  const auto& lik = section(cfg, "likelihood");
  const double lambda = get_or<double>(lik, "lambda", 1.0, "likelihood");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("likelihood.lambda: must lie in [0, 1]");
  const int reps = options.reps > 0 ? options.reps : get_or<int>(lik, "reps", 1, "likelihood");
  if (reps < 1) throw ConfigError("likelihood.reps: must be positive");
  const auto runs = method_runs(lik, lambda, options);

  const auto data = load_data(cfg, base_dir, seed);
  const auto fixed = config::substitute(data.model, fixed_parameters(cfg));
  const auto model = config::build_model(fixed);
  const auto kalman = config::linear_gaussian_spec(fixed);

  struct Summary {
    int reps = 0;
    double mean = 0.0, variance = 0.0, seconds = 0.0;
  };
  std::vector<std::vector<double>> values(runs.size());
  std::vector<Summary> summaries(runs.size());
  for (std::size_t m = 0; m < runs.size(); ++m) {
    const auto& r = runs[m];
    const auto start = std::chrono::steady_clock::now();
    const int count = r.method == "kalman" ? 1 : reps;
    values[m].assign(count, 0.0);
    parallel_for(count, threads, [&](int rep) {
      Rng rng(seed, {kLikelihoodStream + m, static_cast<std::uint64_t>(rep)});
      values[m][rep] = estimate_log_likelihood(*model, fixed, data.observations, r.method, r.particles, lambda,
                                               r.ladder, rng);
    });
    auto& s = summaries[m];
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    s.reps = count;
    s.mean = std::accumulate(values[m].begin(), values[m].end(), 0.0) / count;
    double ss = 0.0;
    for (double v : values[m]) ss += (v - s.mean) * (v - s.mean);
    s.variance = count > 1 ? ss / (count - 1) : 0.0;
  }

  const auto baseline_name = get_or<std::string>(lik, "baseline", "bpf", "likelihood");
  int baseline = -1;
  for (std::size_t m = 0; m < runs.size(); ++m)
    if (runs[m].method == baseline_name && baseline < 0) baseline = static_cast<int>(m);

  const std::string head = csv_header(hash, seed);
  std::string reps_csv = head + "method,particles,rep,log_likelihood\n";
  std::string summary_csv = head + "method,particles,reps,mean,variance,variance_ratio\n";
  json summary = {{"config_hash", hash}, {"seed", seed}, {"lambda", lambda}, {"methods", json::array()}};
  if (kalman) summary["kalman_loglik"] = kalman_loglik(*kalman, data.observations, lambda);
  for (std::size_t m = 0; m < runs.size(); ++m) {
    const auto& r = runs[m];
    const auto& s = summaries[m];
    const bool exact = r.method == "kalman";
    const std::string particles = exact ? "" : std::to_string(r.particles);
    for (int rep = 0; rep < s.reps; ++rep)
      reps_csv += r.method + "," + particles + "," + std::to_string(rep) + "," + format_number(values[m][rep]) + "\n";
    std::string ratio;
    json ratio_json = nullptr;
    if (!exact && baseline >= 0 && summaries[baseline].variance > 0.0 && s.reps > 1) {
      const double v = s.variance / summaries[baseline].variance;
      ratio = format_number(v);
      ratio_json = v;
    }
    summary_csv += r.method + "," + particles + "," + std::to_string(s.reps) + "," + format_number(s.mean) + "," +
                   (exact || s.reps < 2 ? "" : format_number(s.variance)) + "," + ratio + "\n";
    json entry = {{"method", r.method},   {"reps", s.reps},      {"mean", s.mean},
                  {"variance_ratio", ratio_json}, {"wall_seconds", s.seconds}};
    entry["particles"] = exact ? json(nullptr) : json(r.particles);
    entry["variance"] = exact || s.reps < 2 ? json(nullptr) : json(s.variance);
    if (r.method == "acsmc") entry["ladder"] = r.ladder.values;
    summary["methods"].push_back(std::move(entry));
  }

  if (!options.out.empty()) {
    const auto prefix = strip_suffix(options.out, ".csv");
    write_file(prefix + ".reps.csv", reps_csv);
    write_file(prefix + ".summary.csv", summary_csv);
    write_file(prefix + ".json", summary.dump(2) + "\n");
    if (get_or<bool>(lik, "diagnostics", false, "likelihood"))
      for (std::size_t m = 0; m < runs.size(); ++m)
        write_diagnostics(prefix, head, *model, data.observations, runs[m].method, runs[m].particles, lambda,
                          runs[m].ladder, Rng(seed, {kLikelihoodStream + m, 0}));
  }
  return summary_csv;
}

std::string run_simulate(const json& cfg, const std::string&, const RunOptions& options) {
  const auto seed = effective_seed(cfg, options);
  const auto hash = config_hash(cfg, "");
  const auto& sim = section(cfg, "simulate");
  const int horizon = get_or<int>(sim, "T", 0, "simulate");
  std::optional<double> me;
  if (sim.contains("me_fraction")) me = get_or<double>(sim, "me_fraction", 0.0, "simulate");
  const bool with_states = get_or<bool>(sim, "include_states", false, "simulate");
  const std::string out = options.out.empty() ? get_or<std::string>(sim, "out", "", "simulate") : options.out;
  if (out.empty()) throw ConfigError("simulate: no output path (use --out)");
  const auto model = config::substitute(section(cfg, "model"), fixed_parameters(cfg));
  auto result = config::simulate_dataset(model, horizon, me, seed);
  if (!with_states) result.data.states.resize(0, 0);
  config::write_dataset(out, result.data, {{"config_hash", hash}, {"seed", std::to_string(seed)}});
  write_file(out + ".model.json", result.resolved_model.dump(2) + "\n");
  return "wrote " + out + " (T = " + std::to_string(horizon) + ", d_y = " +
         std::to_string(result.data.observations.rows()) + ")\n";
}

std::string run_infer(const json& cfg, const std::string& base_dir, const RunOptions& options) {
  const auto seed = effective_seed(cfg, options);
  const auto hash = config_hash(cfg, base_dir);
  const auto& inf = section(cfg, "infer");
  const auto prior = config::parse_prior(inf.contains("prior") ? inf.at("prior") : json());
  const auto data = load_data(cfg, base_dir, seed);
  const auto factory = config::make_factory(data.model, prior);

  Smc2Config sc;
  const std::string p = "infer";
  sc.parameter_particles = get_or<int>(inf, "parameter_particles", sc.parameter_particles, p);
  sc.state_particles = get_or<int>(inf, "state_particles", sc.state_particles, p);
  sc.ess_fraction = get_or<double>(inf, "ess_fraction", sc.ess_fraction, p);
  sc.fixed_moves = get_or<int>(inf, "fixed_moves", sc.fixed_moves, p);
  sc.acceptance_target = get_or<double>(inf, "acceptance_target", sc.acceptance_target, p);
  sc.max_moves = get_or<int>(inf, "max_moves", sc.max_moves, p);
  sc.policy_threshold = get_or<double>(inf, "policy_threshold", sc.policy_threshold, p);
  sc.ladder_spacing = get_or<double>(inf, "ladder_spacing", sc.ladder_spacing, p);
  sc.rw_scale = get_or<double>(inf, "rw_scale", sc.rw_scale, p);
  sc.controlled = get_or<bool>(inf, "controlled", sc.controlled, p);
  sc.alpha = get_or<double>(inf, "alpha", sc.alpha, p);
  sc.ridge.shrinkage = get_or<double>(inf, "ridge", sc.ridge.shrinkage, p);
  sc.threads = effective_threads(cfg, options);
  sc.seed = seed;
  sc.max_iterations = options.max_iterations >= 0 ? options.max_iterations
                                                  : get_or<int>(inf, "max_iterations", -1, p);
  sc.validate();

  std::optional<Smc2State> resumed;
  if (!options.resume.empty()) {
    const auto ck = load_config(options.resume);
    if (ck.value("config_hash", "") != hash)
      throw ConfigError("checkpoint " + options.resume + " was written for a different config (hash mismatch)");
    if (ck.value("seed", std::uint64_t{0}) != seed)
      throw ConfigError("checkpoint " + options.resume + " was written with seed " +
                        std::to_string(ck.value("seed", std::uint64_t{0})));
    resumed = state_from_json(ck.at("state"));
  }

  const auto prefix = options.out.empty() ? std::string() : strip_suffix(options.out, ".json");
  auto checkpoint = [&](const Smc2State& s) {
    if (prefix.empty()) return;
    json ck = {{"config_hash", hash}, {"seed", seed}, {"state", state_to_json(s)}};
    write_file(prefix + ".checkpoint.json", json_io::dump_exact(ck) + "\n");
  };
  const auto state =
      run_adaptive_smc2(factory, prior, data.observations, sc, resumed ? &*resumed : nullptr, checkpoint);

  std::string diag_csv = csv_header(hash, seed) +
                         "iteration,lambda,ess,log_evidence_increment,moves,cumulative_acceptance,acceptance_rates\n";
  json acceptance = json::array();
  double seconds = 0.0;
  for (const auto& d : state.diagnostics) {
    std::string rates;
    for (std::size_t k = 0; k < d.acceptance_rates.size(); ++k)
      rates += (k ? ";" : "") + format_number(d.acceptance_rates[k]);
    const double cum = std::accumulate(d.acceptance_rates.begin(), d.acceptance_rates.end(), 0.0);
    diag_csv += std::to_string(d.iteration) + "," + format_number(d.lambda) + "," + format_number(d.ess) + "," +
                format_number(d.log_evidence_increment) + "," + std::to_string(d.acceptance_rates.size()) + "," +
                format_number(cum) + "," + rates + "\n";
    acceptance.push_back(d.acceptance_rates);
    seconds += d.wall_seconds;
  }
  const auto post = summarize_cloud(prior, state.cloud);
  json params = json::array();
  for (int i = 0; i < prior.dim(); ++i)
    params.push_back({{"name", post.names[i]},
                      {"mean", post.mean(i)},
                      {"sd", post.sd(i)},
                      {"q05", post.quantiles(i, 0)},
                      {"q50", post.quantiles(i, 1)},
                      {"q95", post.quantiles(i, 2)}});
  json summary = {{"config_hash", hash},
                  {"seed", seed},
                  {"finished", state.finished()},
                  {"iterations", state.iteration},
                  {"log_evidence", state.log_evidence},
                  {"ladder", state.ladder},
                  {"parameters", std::move(params)},
                  {"acceptance_rates", std::move(acceptance)},
                  {"wall_seconds", seconds}};
  const auto text = summary.dump(2) + "\n";
  if (!prefix.empty()) {
    write_file(prefix + ".diagnostics.csv", diag_csv);
    write_file(prefix + ".summary.json", text);
  }
  return text;
}

namespace {
std::string dir_of(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  return parent.empty() ? std::string(".") : parent.string();
}
}  // namespace

std::string cmd_likelihood(const std::string& config_path, const RunOptions& options) {
  return run_likelihood(load_config(config_path), dir_of(config_path), options);
}

std::string cmd_simulate(const std::string& config_path, const RunOptions& options) {
  return run_simulate(load_config(config_path), dir_of(config_path), options);
}

std::string cmd_infer(const std::string& config_path, const RunOptions& options) {
  return run_infer(load_config(config_path), dir_of(config_path), options);
}

}  // namespace acsmc::harness
