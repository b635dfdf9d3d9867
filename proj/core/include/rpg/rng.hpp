#pragma once
// Counter-based deterministic RNG. A stream is (key, counter); fork() derives
// an independent stream from a tag without advancing the parent, so draws are
// reproducible per (step, edge, episode) regardless of evaluation order.

#include <cstdint>
#include <span>
#include <string_view>

namespace rpg {

struct Rng {
  uint64_t key = 0;
  uint64_t counter = 0;

  static Rng seeded(uint64_t seed);

  Rng fork(uint64_t tag) const;
  Rng fork(std::string_view tag) const;

  uint64_t next_u64();
  double next_double();  // uniform in [0, 1)
  double next_normal();  // standard normal via Box-Muller
  int categorical(std::span<const double> probs);
};

}  // namespace rpg
