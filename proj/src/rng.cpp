#include "speconet/rng.hpp"

#include <cmath>
#include <numbers>

namespace speconet {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 a(seed);
  std::uint64_t base = a.next();
  SplitMix64 b(base ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
  return b.next();
}

double NormalSampler::standard() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = gen_.uniform_open0();
  const double u2 = gen_.uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(th);
  has_spare_ = true;
  return r * std::cos(th);
}

}  // namespace speconet
