#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ihfood {

std::uint64_t fnv1a64(std::string_view text) noexcept;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Per-case stream key: mix64(base_seed ^ fnv1a64(case_id)). Independent of
// processing order, so parallel and serial runs agree bit for bit.
std::uint64_t derive_case_seed(std::uint64_t base_seed, std::string_view case_id) noexcept;

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the C++ standard; the distributions below are
// implemented here rather than via <random> distributions, whose algorithms
// vary between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller (one draw consumes two uniforms).
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace ihfood
