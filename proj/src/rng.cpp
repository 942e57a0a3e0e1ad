#include "stabsvrg/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace stabsvrg {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& word : state_) word = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - u lies in (0, 1], keeping the log argument away from zero.
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = kTwoPi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

int Rng::uniform_index(int n) {
  if (n <= 0) throw std::invalid_argument("Rng::uniform_index: n must be positive");
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = (std::numeric_limits<std::uint64_t>::max() / un) * un;
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return static_cast<int>(v % un);
}

Rng Rng::fork(std::uint64_t tag) const { return Rng(mix(seed_, tag)); }

Rng Rng::fork(std::string_view tag) const {
  // FNV-1a over the tag bytes, then mixed with the seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return fork(h);
}

std::uint64_t Rng::mix(std::uint64_t key, std::uint64_t data) {
  std::uint64_t state = key ^ rotl(data, 29) ^ 0x6a09e667f3bcc908ULL;
  std::uint64_t a = splitmix64(state);
  std::uint64_t b = splitmix64(state);
  return a ^ rotl(b, 17);
}

Eigen::VectorXd sample_ball(const Eigen::VectorXd& center, double radius, Rng& rng) {
  if (!center.allFinite() || !std::isfinite(radius) || radius < 0.0)
    throw std::invalid_argument("sample_ball: center and radius must be finite, radius >= 0");
  const Eigen::Index d = center.size();
  if (d < 1) throw std::invalid_argument("sample_ball: dimension must be at least 1");
  if (radius == 0.0) return center;

  // Gaussian direction, radius scaled by delta * U^(1/d): exact uniform-ball
  // law in any dimension, no rejection loop.
  Eigen::VectorXd direction(d);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < d; ++i) direction[i] = rng.normal();
    norm = direction.norm();
  } while (norm == 0.0);
  const double u = rng.uniform01();
  const double scale = radius * std::pow(u, 1.0 / static_cast<double>(d)) / norm;
  return center + scale * direction;
}

std::vector<int> sample_minibatch(int n, int b, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_minibatch: n must be positive");
  if (b < 1) throw std::invalid_argument("sample_minibatch: b must be positive");
  std::vector<int> batch;
  batch.reserve(static_cast<std::size_t>(b));
  for (int k = 0; k < b; ++k) batch.push_back(rng.uniform_index(n));
  return batch;
}

bool random_stop_draw(int m, int t, Rng& rng) {
  if (t < 1 || t > m) throw std::invalid_argument("random_stop_draw: t must lie in [1, m]");
  const double p = 1.0 / static_cast<double>(m - (t - 1));
  return rng.uniform01() < p;
}

}  // namespace stabsvrg
