#include "epbrm/boxcodec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "epbrm/errors.hpp"

namespace epbrm {

TransformBounds TransformBounds::for_dist_bound(double dist_bound) {
  TransformBounds b;
  b.translation = {dist_bound, dist_bound, dist_bound};
  return b;
}

bool TransformBounds::valid() const {
  return translation.x > 0 && translation.y > 0 && translation.z > 0 &&
         rotation > 0 && scale_xy > 1.0 && scale_z > 1.0;
}

RegressionBounds RegressionBounds::from(const TransformBounds& t) {
  return {0.5 * t.translation};
}

SizeAnchor SizeAnchor::for_class(ObjectClass c) {
  switch (c) {
    case ObjectClass::kCar:
      return {{1.50, 1.57, 3.33}};
    case ObjectClass::kPedestrian:
      return {{1.73, 0.60, 0.80}};
    case ObjectClass::kCyclist:
      return {{1.73, 0.60, 1.76}};
  }
  return {{1.50, 1.57, 3.33}};
}

double RotationBins::width() const { return std::numbers::pi / count; }

std::size_t head_output_width(const RotationBins& bins) {
  return 6 + 2 * static_cast<std::size_t>(bins.count);
}

RawBoxOutput RawBoxOutput::unpack(std::span<const double> flat,
                                  const RotationBins& bins) {
  if (flat.size() != head_output_width(bins)) {
    throw ShapeError("head output has " + std::to_string(flat.size()) +
                     " values, expected " + std::to_string(head_output_width(bins)));
  }
  RawBoxOutput out;
  out.t_location = {flat[0], flat[1], flat[2]};
  out.t_size = {flat[3], flat[4], flat[5]};
  const auto n = static_cast<std::size_t>(bins.count);
  out.rot_cls.assign(flat.begin() + 6, flat.begin() + 6 + n);
  out.rot_reg.assign(flat.begin() + 6 + n, flat.end());
  return out;
}

std::vector<double> RawBoxOutput::pack() const {
  std::vector<double> flat{t_location.x, t_location.y, t_location.z,
                           t_size.x,     t_size.y,     t_size.z};
  flat.insert(flat.end(), rot_cls.begin(), rot_cls.end());
  flat.insert(flat.end(), rot_reg.begin(), rot_reg.end());
  return flat;
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

namespace {

// 2 * (sigmoid(t) - 0.5) == tanh(t / 2). Saturated inputs round to +-1 in
// double precision; they are pulled back by one ulp to keep the range open.
double unit_bounded(double t) {
  const double u = std::tanh(0.5 * t);
  if (u >= 1.0) return std::nextafter(1.0, 0.0);
  if (u <= -1.0) return -std::nextafter(1.0, 0.0);
  return u;
}

double unit_bounded_derivative(double t) {
  const double u = std::tanh(0.5 * t);
  return 0.5 * (1.0 - u * u);
}

}  // namespace

double bounded(double t, double bound) {
  const double v = unit_bounded(t) * bound;
  if (std::abs(v) >= bound) return std::copysign(std::nextafter(bound, 0.0), v);
  return v;
}

double bounded_derivative(double t, double bound) {
  return unit_bounded_derivative(t) * bound;
}

double bounded_scale(double t, double base) {
  const double v = std::pow(base, unit_bounded(t));
  if (v >= base) return std::nextafter(base, 0.0);
  if (v <= 1.0 / base) return std::nextafter(1.0 / base, base);
  return v;
}

double bounded_scale_derivative(double t, double base) {
  return bounded_scale(t, base) * std::log(base) * unit_bounded_derivative(t);
}

Point3 decode_translation(const Point3& t, const TransformBounds& bounds) {
  return {bounded(t.x, bounds.translation.x), bounded(t.y, bounds.translation.y),
          bounded(t.z, bounds.translation.z)};
}

double decode_rotation_transform(double t_r, const TransformBounds& bounds) {
  return bounded(t_r, bounds.rotation);
}

std::pair<double, double> decode_scale(double t_xy, double t_z,
                                       const TransformBounds& bounds) {
  return {bounded_scale(t_xy, bounds.scale_xy), bounded_scale(t_z, bounds.scale_z)};
}

Point3 decode_location(const Point3& t, const RegressionBounds& bounds) {
  return {bounded(t.x, bounds.d.x), bounded(t.y, bounds.d.y),
          bounded(t.z, bounds.d.z)};
}

EncodedRotation encode_rotation(double yaw, const RotationBins& bins) {
  const double theta = wrap_half_turn(yaw);
  const int bin = std::clamp(static_cast<int>(std::floor(theta / bins.width())), 0,
                             bins.count - 1);
  return {bin, (theta - bins.center(bin)) / bins.half_width()};
}

double decode_rotation(std::span<const double> rot_cls,
                       std::span<const double> rot_reg, const RotationBins& bins) {
  const auto n = static_cast<std::size_t>(bins.count);
  if (rot_cls.size() != n || rot_reg.size() != n) {
    throw ShapeError("rotation outputs must have one entry per bin");
  }
  // max_element returns the first maximum, giving the lowest-index tie-break.
  const auto best = static_cast<int>(
      std::max_element(rot_cls.begin(), rot_cls.end()) - rot_cls.begin());
  return wrap_half_turn(bins.center(best) + rot_reg[best] * bins.half_width());
}

BoxSize decode_size(const Point3& t, const SizeAnchor& anchor) {
  return {anchor.size.h * std::exp(t.x), anchor.size.w * std::exp(t.y),
          anchor.size.l * std::exp(t.z)};
}

Point3 encode_size(const BoxSize& size, const SizeAnchor& anchor) {
  return {std::log(size.h / anchor.size.h), std::log(size.w / anchor.size.w),
          std::log(size.l / anchor.size.l)};
}

double encode_bounded(double value, double bound) {
  const double limit = 0.999 * bound;
  const double v = std::clamp(value, -limit, limit);
  const double s = 0.5 * (v / bound) + 0.5;
  return std::log(s / (1.0 - s));
}

}  // namespace epbrm
