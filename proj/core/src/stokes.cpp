#include "pqkd/stokes.hpp"

#include <algorithm>
#include <cmath>

namespace pqkd {

double StokesVector::norm() const { return std::sqrt(dot(*this)); }

StokesVector StokesVector::normalized() const {
  const double n = norm();
  if (n == 0.0) {
    throw std::invalid_argument("cannot normalize a zero Stokes vector");
  }
  return *this * (1.0 / n);
}

double StokesVector::azimuth2() const { return std::atan2(s2, s1); }

double StokesVector::ellipticity2() const { return std::asin(std::clamp(s3, -1.0, 1.0)); }

double angle_between(const StokesVector& a, const StokesVector& b) {
  // atan2 form stays accurate for nearly parallel vectors
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

StokesVector stokes_from_angles(double azimuth_2theta, double ellipticity_2eps) {
  const double c = std::cos(ellipticity_2eps);
  return {c * std::cos(azimuth_2theta), c * std::sin(azimuth_2theta), std::sin(ellipticity_2eps)};
}

PoincareRotation::PoincareRotation(const StokesVector& axis, double angle) : axis_(axis), angle_(angle) {
  if (std::abs(axis.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("rotation axis must be a unit vector");
  }
}

PoincareRotation PoincareRotation::from_quaternion(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (n == 0.0) {
    throw std::invalid_argument("zero quaternion");
  }
  w /= n;
  x /= n;
  y /= n;
  z /= n;
  const double vn = std::sqrt(x * x + y * y + z * z);
  if (vn < 1e-300) {
    return identity();
  }
  PoincareRotation r;
  r.axis_ = {x / vn, y / vn, z / vn};
  r.angle_ = 2.0 * std::atan2(vn, w);
  return r;
}

PoincareRotation PoincareRotation::inverse() const {
  PoincareRotation r = *this;
  r.angle_ = -angle_;
  return r;
}

std::array<double, 4> PoincareRotation::quaternion() const {
  const double h = 0.5 * angle_;
  const double s = std::sin(h);
  return {std::cos(h), axis_.s1 * s, axis_.s2 * s, axis_.s3 * s};
}

Matrix3 PoincareRotation::matrix() const {
  const double c = std::cos(angle_);
  const double s = std::sin(angle_);
  const double t = 1.0 - c;
  const double x = axis_.s1, y = axis_.s2, z = axis_.s3;
  return {{{t * x * x + c, t * x * y - s * z, t * x * z + s * y},
           {t * x * y + s * z, t * y * y + c, t * y * z - s * x},
           {t * x * z - s * y, t * y * z + s * x, t * z * z + c}}};
}

StokesVector PoincareRotation::apply(const StokesVector& v) const {
  const double c = std::cos(angle_);
  const double s = std::sin(angle_);
  return v * c + axis_.cross(v) * s + axis_ * (axis_.dot(v) * (1.0 - c));
}

StokesVector rotate(const StokesVector& s, const PoincareRotation& r) { return r.apply(s); }

PoincareRotation compose(const PoincareRotation& first, const PoincareRotation& second) {
  const auto [aw, ax, ay, az] = second.quaternion();
  const auto [bw, bx, by, bz] = first.quaternion();
  // Hamilton product second * first
  return PoincareRotation::from_quaternion(aw * bw - ax * bx - ay * by - az * bz,
                                           aw * bx + ax * bw + ay * bz - az * by,
                                           aw * by - ax * bz + ay * bw + az * bx,
                                           aw * bz + ax * by - ay * bx + az * bw);
}

EstimatedSOP estimate_stokes(const ClickCounts& c, std::uint64_t window_pulses) {
  const auto hv = c.i_h + c.i_v;
  const auto qr = c.i_q + c.i_r;
  if (hv == 0 || qr == 0) {
    throw ZeroWindowError();
  }
  EstimatedSOP e;
  e.s1_hat = (static_cast<double>(c.i_h) - static_cast<double>(c.i_v)) / static_cast<double>(hv);
  e.s2_hat = (static_cast<double>(c.i_q) - static_cast<double>(c.i_r)) / static_cast<double>(qr);
  e.window_pulses = window_pulses;
  return e;
}

}  // namespace pqkd
