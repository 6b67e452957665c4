#include "acsmc/rng.hpp"

#include <sstream>

#include "acsmc/error.hpp"

namespace acsmc {

namespace {

std::seed_seq make_seed_seq(std::uint64_t seed, const std::vector<std::uint64_t>& path) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (path.size() + 1) + 1);
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffULL));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  words.push_back(static_cast<std::uint32_t>(path.size()));
  for (auto p : path) push(p);
  return std::seed_seq(words.begin(), words.end());
}

}  // namespace

Rng::Rng(std::uint64_t seed) : Rng(seed, std::vector<std::uint64_t>{}) {}

Rng::Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
    : Rng(seed, std::vector<std::uint64_t>(path)) {}

Rng::Rng(std::uint64_t seed, const std::vector<std::uint64_t>& path) {
  auto seq = make_seed_seq(seed, path);
  engine_.seed(seq);
}

double Rng::uniform() {
  // 53 random bits -> [0, 1) exactly representable, never 1.0.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::gamma(double shape, double scale) {
  std::gamma_distribution<double> dist(shape, scale);
  return dist(engine_);
}

std::uint64_t Rng::poisson(double rate) {
  if (rate <= 0.0) return 0;
  std::poisson_distribution<std::uint64_t> dist(rate);
  return dist(engine_);
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_ << ' ' << normal_;
  return os.str();
}

void Rng::set_state(const std::string& text) {
  std::istringstream is(text);
  is >> engine_ >> normal_;
  if (!is) throw InvalidInput("Rng::set_state: malformed generator state");
}

}  // namespace acsmc
