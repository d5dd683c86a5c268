#pragma once

#include <cstdint>
#include <random>

namespace cdm {

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t value);
std::uint64_t combine_seed(std::uint64_t seed, std::uint64_t value);

// Portable random stream: std::mt19937_64 is bit-exact across standard
// libraries, the variate transforms below are ours so they are too.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, bound).
  std::uint64_t uniform_int(std::uint64_t bound);
  bool bernoulli(double p) { return uniform() < p; }
  // Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
};

// Standard normal quantile (Wichura's AS241, relative error about 1e-16).
double inverse_normal_cdf(double p);

}  // namespace cdm
