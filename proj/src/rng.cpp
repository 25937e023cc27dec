#include "scansnap/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace scansnap {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return static_cast<std::size_t>(x % n);
}

Rng Rng::split(std::uint64_t stream) const {
  return Rng(seed_ ^ splitmix64(stream + 1));
}

std::string Rng::state() const {
  std::ostringstream os;
  os << seed_ << ' ' << engine_;
  return os.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream is(s);
  is >> seed_ >> engine_;
  if (!is) throw std::invalid_argument("Rng::set_state: malformed state");
}

CategoricalSampler::CategoricalSampler(std::span<const double> probs) {
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] < 0.0) throw std::invalid_argument("CategoricalSampler: negative probability");
    if (probs[i] == 0.0) continue;
    acc += probs[i];
    cdf_.push_back(acc);
    index_.push_back(i);
  }
  if (cdf_.empty()) throw std::invalid_argument("CategoricalSampler: empty support");
  for (double& c : cdf_) c /= acc;
  cdf_.back() = 1.0;
}

std::size_t CategoricalSampler::operator()(Rng& rng) const {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto k = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(),
                                                                   static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
  return index_[k];
}

}  // namespace scansnap
