#include "pqkd/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pqkd {

double default_drift_angle_std(double length_km) {
  return kDriftAngleStd50km * std::sqrt(std::max(length_km, 0.0) / 50.0);
}

void FiberScenario::validate() const {
  if (length_km < 0 || loss_db_per_km < 0 || element_loss_db < 0 || drift_angle_std < 0 ||
      source_mean_photons_qkd < 0 || source_mean_photons_ref < 0 || laser_offset_rad < 0) {
    throw std::invalid_argument("fiber scenario fields must be nonnegative");
  }
  if (!(control_interval_s > 0)) {
    throw std::invalid_argument("control_interval_s must be positive");
  }
}

double transmittance(const FiberScenario& sc) {
  return std::pow(10.0, -(sc.length_km * sc.loss_db_per_km + sc.element_loss_db) / 10.0);
}

StokesVector uniform_random_axis(Rng& rng) {
  const double z = 2.0 * uniform01(rng) - 1.0;
  const double phi = 2.0 * std::numbers::pi * uniform01(rng);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

PoincareRotation uniform_random_rotation(Rng& rng) {
  // Shoemake's method
  const double u1 = uniform01(rng), u2 = uniform01(rng), u3 = uniform01(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double t2 = 2.0 * std::numbers::pi * u2, t3 = 2.0 * std::numbers::pi * u3;
  return PoincareRotation::from_quaternion(b * std::cos(t3), a * std::sin(t2), a * std::cos(t2), b * std::sin(t3));
}

ChannelState evolve_drift(const ChannelState& st, double dt, double drift_angle_std, Rng& rng) {
  if (dt < 0) {
    throw std::invalid_argument("dt must be nonnegative");
  }
  ChannelState next = st;
  next.elapsed_s += dt;
  if (dt == 0.0 || drift_angle_std == 0.0) {
    return next;
  }
  const StokesVector axis = uniform_random_axis(rng);
  const double angle = std::normal_distribution<double>(0.0, drift_angle_std * std::sqrt(dt))(rng);
  next.birefringence = compose(st.birefringence, PoincareRotation(axis, angle));
  return next;
}

StokesVector apply_channel(const StokesVector& s, const ChannelState& st, const PoincareRotation& actuator) {
  return rotate(s, compose(st.birefringence, actuator));
}

}  // namespace pqkd
