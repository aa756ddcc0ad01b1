#pragma once

#include <cstdint>

namespace tenm {

// Counter-based stream: value i of stream (seed, key) is splitmix64(seed ^ mix(key) + i).
// No hidden state beyond the counter, so draws are identical on every platform.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t key = 0)
    : base_(mix(seed ^ mix(key + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next_u64() { return mix(base_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // uniform on [0,1) with 53 random bits
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  CounterRng substream(std::uint64_t key) const { return CounterRng(base_, key); }
  std::uint64_t counter() const { return counter_; }

private:
  static std::uint64_t mix(std::uint64_t z)
  {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

} // namespace tenm
