#pragma once

#include <cstdint>

namespace speconet {

inline constexpr const char* kPrngName = "splitmix64+box-muller";

// SplitMix64 (Steele, Lea, Flood 2014).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on (0, 1].
  double uniform_open0() { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }
  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Independent stream for (seed, stream id): the seed is mixed with the stream
// index so nearby ids do not produce correlated sequences.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : gen_(seed) {}
  NormalSampler(std::uint64_t seed, std::uint64_t stream) : gen_(stream_seed(seed, stream)) {}

  double standard();
  double operator()(double mean, double sd) { return mean + sd * standard(); }
  SplitMix64& engine() { return gen_; }

 private:
  SplitMix64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace speconet
