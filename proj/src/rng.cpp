#include "so3lap/rng.hpp"

#include <cmath>
#include <numbers>

namespace so3lap {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  const double u1 = uniform_open_low();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Reject the incomplete top bucket so the modulo is unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

UnitQuaternion random_quaternion(Rng& rng) {
  for (;;) {
    const double w = rng.normal();
    const double x = rng.normal();
    const double y = rng.normal();
    const double z = rng.normal();
    if (w * w + x * x + y * y + z * z > 1e-12) {
      return UnitQuaternion::normalized(w, x, y, z);
    }
  }
}

Rotation random_rotation(Rng& rng) { return quat_to_rot(random_quaternion(rng)); }

Vec3 random_in_ball(Rng& rng, double radius) {
  for (;;) {
    const Vec3 v(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
    if (v.squaredNorm() <= 1.0) return radius * v;
  }
}

}  // namespace so3lap
