#include "zrl/rng.hpp"

#include <cmath>

namespace zrl::rng {

namespace {

constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline std::uint64_t mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t* hi) {
  const auto p = static_cast<__uint128_t>(a) * b;
  *hi = static_cast<std::uint64_t>(p >> 64);
  return static_cast<std::uint64_t>(p);
}

inline Counter round_once(const Counter& c, const Key& k) {
  std::uint64_t hi0, hi1;
  const std::uint64_t lo0 = mulhilo(kMul0, c[0], &hi0);
  const std::uint64_t lo1 = mulhilo(kMul1, c[2], &hi1);
  return Counter{hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

Counter philox4x64(const Counter& counter, const Key& key) {
  Counter c = counter;
  Key k = key;
  for (int i = 0; i < 10; ++i) {
    if (i > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    c = round_once(c, k);
  }
  return c;
}

std::uint64_t mix_ids(std::initializer_list<std::uint64_t> ids) {
  std::uint64_t acc = 0x5A17C34B9D2E8F01ULL;
  for (std::uint64_t id : ids) {
    acc = splitmix64(acc ^ id);
  }
  return acc;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001B3ULL;
  }
  return h;
}

Stream::Stream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {}

Stream Stream::substream(std::initializer_list<std::uint64_t> ids) const {
  std::uint64_t acc = stream_id_;
  for (std::uint64_t id : ids) {
    acc = splitmix64(acc ^ id);
  }
  return Stream(seed_, acc);
}

std::uint64_t Stream::next_u64() {
  if (buffer_pos_ == 4) {
    buffer_ = philox4x64(counter_, Key{seed_, stream_id_});
    buffer_pos_ = 0;
    for (auto& word : counter_) {
      if (++word != 0) break;  // 256-bit increment with carry
    }
  }
  return buffer_[buffer_pos_++];
}

double Stream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Stream::next_double_open() {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

std::uint64_t Stream::next_below(std::uint64_t n) {
  // Rejection sampling over the largest multiple of n below 2^64.
  const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Stream::next_gaussian() {
  const double u1 = next_double_open();
  const double u2 = next_double();
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace zrl::rng
