// Seeded random source with platform-independent output.
//
// Bits come from std::mt19937_64, whose output sequence is fixed by the C++
// standard. The std:: distributions are implementation-defined, so uniform
// and normal variates are derived here directly from the raw 64-bit words.
#pragma once

#include <cstdint>
#include <random>

#include "so3lap/so3.hpp"

namespace so3lap {

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform double in (0, 1].
  double uniform_open_low() { return 1.0 - uniform(); }
  /// Standard normal via Box–Muller (no cached second variate).
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Haar-uniform rotation: quaternion from four standard normals.
Rotation random_rotation(Rng& rng);
UnitQuaternion random_quaternion(Rng& rng);
/// Uniform point in the ball of the given radius.
Vec3 random_in_ball(Rng& rng, double radius);

}  // namespace so3lap
