#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string_view>
#include <vector>

namespace stabsvrg {

/// Deterministic, seedable random stream (xoshiro256++ seeded via splitmix64).
///
/// The same seed yields the same sequence of integers and uniforms on every
/// platform. Sub-streams are derived by hashing (seed, tag), so adding draws
/// to one component of a run never shifts the draws of another. Instances are
/// single-owner: never share one across threads, fork instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform01();

  /// Standard normal via Box-Muller (one spare cached).
  double normal();

  /// Uniform on {0, ..., n-1}, unbiased (rejection sampling).
  int uniform_index(int n);

  /// Independent sub-stream determined only by (seed, tag).
  Rng fork(std::uint64_t tag) const;
  Rng fork(std::string_view tag) const;

  std::uint64_t seed() const { return seed_; }

  /// Stateless 64-bit mix of (key, data); used for stream derivation and
  /// stable content hashes.
  static std::uint64_t mix(std::uint64_t key, std::uint64_t data);

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// center + xi with xi uniform on the closed Euclidean ball of given radius.
/// radius 0 returns the center exactly and consumes no draws.
Eigen::VectorXd sample_ball(const Eigen::VectorXd& center, double radius, Rng& rng);

/// Multiset of b indices drawn i.i.d. uniform from {0, ..., n-1}.
std::vector<int> sample_minibatch(int n, int b, Rng& rng);

/// True with probability exactly 1/(m - (t - 1)); always true at t == m.
bool random_stop_draw(int m, int t, Rng& rng);

}  // namespace stabsvrg
