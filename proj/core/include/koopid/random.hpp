#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace koopid {

/// Seed of the named substream `name` of a root seed. Substreams with
/// different names are statistically independent; the mapping is stable
/// across platforms and releases.
std::uint64_t substream_seed(std::uint64_t root_seed, std::string_view name);

/// Thin wrapper over mt19937_64 producing platform-independent uniform doubles
/// (std::uniform_real_distribution is implementation-defined).
class RandomStream {
public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
  RandomStream(std::uint64_t root_seed, std::string_view name)
      : engine_(substream_seed(root_seed, name)) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Standard normal via Box-Muller.
  double normal();

  std::uint64_t next() { return engine_(); }

private:
  std::mt19937_64 engine_;
};

} // namespace koopid
