#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace scansnap {

// SplitMix64 finalizer. Used to derive seeds and child streams.
std::uint64_t splitmix64(std::uint64_t x);

// Seedable, splittable generator.
//
// Algorithm: std::mt19937_64 (fully specified by the C++ standard) seeded
// with splitmix64(seed). Child streams are seeded with
// splitmix64(seed ^ splitmix64(stream + 1)), so split(k) is a pure function
// of (seed, k). Floating-point draws use the top 53 bits of one engine
// output, so every draw is bit-reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform();
  // Standard normal via Box-Muller (one output per call, second discarded).
  double normal();
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  Rng split(std::uint64_t stream) const;

  std::string state() const;
  void set_state(const std::string& s);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// Inverse-CDF sampler over a fixed discrete distribution.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(std::span<const double> probs);
  std::size_t operator()(Rng& rng) const;

 private:
  std::vector<double> cdf_;
  std::vector<std::size_t> index_;
};

}  // namespace scansnap
