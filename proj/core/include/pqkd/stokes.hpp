/**
 * @file stokes.hpp
 * @brief Poincare-sphere geometry for fully polarized single-photon states.
 *
 * A state of polarization (SOP) is a unit Stokes vector (S1, S2, S3):
 * - S1: horizontal (H, +1) vs vertical (V, -1)
 * - S2: +45 deg (Q, +1) vs -45 deg (R, -1)
 * - S3: circular
 *
 * Birefringent elements act as proper rotations of the sphere. Rotations are
 * right-handed about their axis (counter-clockwise when viewed from the tip of
 * the axis); the controller only relies on this being consistent.
 */

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>

namespace pqkd {

struct StokesVector {
  double s1 = 1.0;
  double s2 = 0.0;
  double s3 = 0.0;

  [[nodiscard]] double norm() const;
  [[nodiscard]] double dot(const StokesVector& o) const { return s1 * o.s1 + s2 * o.s2 + s3 * o.s3; }
  [[nodiscard]] StokesVector cross(const StokesVector& o) const {
    return {s2 * o.s3 - s3 * o.s2, s3 * o.s1 - s1 * o.s3, s1 * o.s2 - s2 * o.s1};
  }
  [[nodiscard]] StokesVector normalized() const;

  /// Double azimuth 2*theta, the longitude on the sphere.
  [[nodiscard]] double azimuth2() const;
  /// Double ellipticity 2*epsilon, the latitude on the sphere.
  [[nodiscard]] double ellipticity2() const;

  StokesVector operator-() const { return {-s1, -s2, -s3}; }
  StokesVector operator+(const StokesVector& o) const { return {s1 + o.s1, s2 + o.s2, s3 + o.s3}; }
  StokesVector operator-(const StokesVector& o) const { return {s1 - o.s1, s2 - o.s2, s3 - o.s3}; }
  StokesVector operator*(double k) const { return {s1 * k, s2 * k, s3 * k}; }
  bool operator==(const StokesVector&) const = default;
};

inline constexpr StokesVector kH{1.0, 0.0, 0.0};
inline constexpr StokesVector kV{-1.0, 0.0, 0.0};
inline constexpr StokesVector kQ{0.0, 1.0, 0.0};
inline constexpr StokesVector kR{0.0, -1.0, 0.0};

/// Eigen-axes of the two actuators and the circular axis.
inline constexpr StokesVector kAxisHV = kH;
inline constexpr StokesVector kAxisQR = kQ;
inline constexpr StokesVector kAxisCircular{0.0, 0.0, 1.0};

/// Great-circle distance between two unit vectors, in radians.
double angle_between(const StokesVector& a, const StokesVector& b);

/// (cos2e cos2t, cos2e sin2t, sin2e)
StokesVector stokes_from_angles(double azimuth_2theta, double ellipticity_2eps);

using Matrix3 = std::array<std::array<double, 3>, 3>;

class PoincareRotation {
 public:
  /// Identity rotation.
  PoincareRotation() = default;

  /// Throws std::invalid_argument if |axis| differs from 1 by more than 1e-9.
  PoincareRotation(const StokesVector& axis, double angle);

  static PoincareRotation identity() { return {}; }

  /// Unit quaternion (w, x, y, z); sign is irrelevant. Normalizes its input.
  static PoincareRotation from_quaternion(double w, double x, double y, double z);

  [[nodiscard]] const StokesVector& axis() const { return axis_; }
  [[nodiscard]] double angle() const { return angle_; }

  [[nodiscard]] PoincareRotation inverse() const;
  [[nodiscard]] Matrix3 matrix() const;
  [[nodiscard]] std::array<double, 4> quaternion() const;

  /// Rodrigues formula.
  [[nodiscard]] StokesVector apply(const StokesVector& s) const;

 private:
  StokesVector axis_ = kAxisHV;
  double angle_ = 0.0;
};

StokesVector rotate(const StokesVector& s, const PoincareRotation& r);

/// Rotation equal to applying `first` and then `second`.
PoincareRotation compose(const PoincareRotation& first, const PoincareRotation& second);

/// Clicks of the H, V, Q and R detectors over one sampling window.
struct ClickCounts {
  std::uint64_t i_h = 0;
  std::uint64_t i_v = 0;
  std::uint64_t i_q = 0;
  std::uint64_t i_r = 0;

  bool operator==(const ClickCounts&) const = default;
};

struct EstimatedSOP {
  double s1_hat = 0.0;
  double s2_hat = 0.0;
  std::uint64_t window_pulses = 0;
};

/// Raised when a window has no clicks in one of the two arms; the sample is unusable.
class ZeroWindowError : public std::runtime_error {
 public:
  ZeroWindowError() : std::runtime_error("zero clicks in a measurement arm") {}
};

/// Normalized Stokes estimate from detector clicks:
/// s1 = (I_H - I_V) / (I_H + I_V), s2 = (I_Q - I_R) / (I_Q + I_R).
EstimatedSOP estimate_stokes(const ClickCounts& c, std::uint64_t window_pulses = 0);

}  // namespace pqkd
