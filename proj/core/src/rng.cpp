#include "rpg/rng.hpp"

#include <cmath>

namespace rpg {

namespace {
constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer
uint64_t mix(uint64_t z) {
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

Rng Rng::seeded(uint64_t seed) { return Rng{mix(seed), 0}; }

Rng Rng::fork(uint64_t tag) const { return Rng{mix(key ^ mix(tag)), 0}; }

Rng Rng::fork(std::string_view tag) const {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return fork(h);
}

uint64_t Rng::next_u64() { return mix(key + kGolden * ++counter); }

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_normal() {
  const double u1 = next_double();
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
  return r * std::cos(2.0 * M_PI * u2);
}

int Rng::categorical(std::span<const double> probs) {
  const double u = next_double();
  double acc = 0.0;
  for (size_t k = 0; k + 1 < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace rpg
