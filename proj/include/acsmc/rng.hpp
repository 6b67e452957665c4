#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

namespace acsmc {

/// Seeded random stream. Every random draw in the library goes through one
/// of these; streams derived with `Rng::substream` from the same root seed
/// and path are identical regardless of which thread consumes them.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path);
  Rng(std::uint64_t seed, const std::vector<std::uint64_t>& path);

  static Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    return Rng(seed, path);
  }

  double normal() { return normal_(engine_); }
  /// Uniform on [0, 1).
  double uniform();
  double gamma(double shape, double scale);
  std::uint64_t poisson(double rate);

  std::mt19937_64& engine() { return engine_; }

  /// Full generator state (engine and cached normal deviate) as text.
  std::string state() const;
  void set_state(const std::string& text);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace acsmc
