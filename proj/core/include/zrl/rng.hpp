#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace zrl::rng {

/// Name of the generator algorithm; recorded in configs and checkpoints so
/// the determinism contract is auditable.
inline constexpr std::string_view kAlgorithm = "philox4x64-10";

using Counter = std::array<std::uint64_t, 4>;
using Key = std::array<std::uint64_t, 2>;

/// One Philox 4x64 block with 10 rounds. Pure function of (counter, key).
Counter philox4x64(const Counter& counter, const Key& key);

/// Mixes an arbitrary list of ids into a single 64-bit stream id
/// (splitmix64 finalizer over a running accumulator).
std::uint64_t mix_ids(std::initializer_list<std::uint64_t> ids);

/// 64-bit FNV-1a over bytes; used to derive content-keyed streams.
std::uint64_t fnv1a64(std::string_view bytes);

/// A counter-based random stream. The key is (seed, stream id); the counter
/// advances one block per four 64-bit draws. Two streams with distinct ids
/// are statistically independent, and any stream can be reconstructed from
/// (seed, id) alone — no sequential state needs to be checkpointed.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream_id);

  /// Derives a child stream. Children of distinct (parent, ids) never collide
  /// in practice; the id space is mixed, not structured.
  Stream substream(std::initializer_list<std::uint64_t> ids) const;

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double();

  /// Uniform double in (0, 1]; safe as a log() argument.
  double next_double_open();

  /// Uniform integer in [0, n). Unbiased (rejection sampling). n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  /// Standard normal draw (Box-Muller, no caching: two uniforms per call).
  double next_gaussian();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  Counter counter_{};
  Counter buffer_{};
  int buffer_pos_ = 4;  // empty
};

}  // namespace zrl::rng

namespace zrl {
using rng::fnv1a64;
using rng::mix_ids;
using rng::Stream;
}  // namespace zrl
