#include "acsmc/annealing.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "acsmc/error.hpp"

namespace acsmc {

TemperatureLadder TemperatureLadder::uniform(int count) {
  if (count < 2) throw InvalidInput("uniform ladder needs at least two temperatures");
  TemperatureLadder l;
  l.values.resize(count);
  for (int i = 0; i < count; ++i) l.values[i] = static_cast<double>(i) / (count - 1);
  l.values.back() = 1.0;
  return l;
}

void TemperatureLadder::validate() const {
  if (values.empty() || values.front() != 0.0) throw InvalidInput("ladder must start at 0");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i] > values[i - 1])) throw InvalidInput("ladder must be strictly increasing");
  if (!(values.back() <= 1.0)) throw InvalidInput("ladder must end at or below 1");
}

AcsmcResult run_acsmc(const StateSpaceModel& model, const ConstMatrixRef& observations,
                      const TemperatureLadder& ladder, int particles, Rng& rng, const AcsmcOptions& options) {
  ladder.validate();
  const int horizon = static_cast<int>(observations.cols());
  AcsmcResult out;
  out.policy = QuadraticPolicy::constant_one(model.policy_layout(), horizon);

  auto record = [&](int stage, double lambda, double min_rate, int clipped) {
    StageDiagnostics d;
    d.stage = stage;
    d.lambda = lambda;
    d.log_likelihood = out.output.log_likelihood;
    d.min_ess = out.output.min_ess();
    d.min_learning_rate = min_rate;
    d.clipped_targets = clipped;
    out.stages.push_back(d);
  };

  auto guarded = [&](int stage, auto&& body) {
    try {
      body();
    } catch (const StageFailure&) {
      throw;
    } catch (const DegenerateWeights& e) {
      throw StageFailure(stage, "stage " + std::to_string(stage) + ": " + e.what());
    } catch (const NonFiniteWeight& e) {
      throw StageFailure(stage, "stage " + std::to_string(stage) + ": " + e.what());
    } catch (const PolicyInvariantError& e) {
      throw StageFailure(stage, "stage " + std::to_string(stage) + ": " + e.what());
    }
  };

  guarded(0, [&] { out.output = run_controlled_smc(model, observations, ladder.values[0], &out.policy, particles, rng); });
  record(0, ladder.values[0], 1.0, 0);

  for (std::size_t i = 1; i < ladder.values.size(); ++i) {
    const int stage = static_cast<int>(i);
    double min_rate = 1.0;
    int clipped = 0;
    guarded(stage, [&] {
      auto adp = adp_backward_pass(model, observations, ladder.values[i - 1], ladder.values[i], out.policy,
                                   out.output, options.ridge, options.alpha);
      min_rate = *std::min_element(adp.learning_rates.begin(), adp.learning_rates.end());
      clipped = adp.clipped_targets;
      out.policy = std::move(adp.refined);
      out.output = run_controlled_smc(model, observations, ladder.values[i], &out.policy, particles, rng);
    });
    record(stage, ladder.values[i], min_rate, clipped);
  }
  return out;
}

}  // namespace acsmc
