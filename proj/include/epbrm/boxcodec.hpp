#pragma once

// Closed-form maps between raw network outputs and geometric quantities.
//
// Bounded decodes share the form 2 * (sigmoid(t) - 0.5) * T, which lies in the
// open interval (-T, T). Scales use T^(2 * (sigmoid(t) - 0.5)), which lies in
// (1/T, T). Every decode has an analytic derivative next to it for the
// backward pass.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "epbrm/geometry.hpp"
#include "epbrm/object_class.hpp"

namespace epbrm {

/// Ranges of the transformation-stage parameters.
struct TransformBounds {
  Point3 translation{0.15, 0.15, 0.15};  // meters; equal to dist_bound
  double rotation = 0.78539816339744831;  // pi / 4
  double scale_xy = 2.0;
  double scale_z = 2.0;

  static TransformBounds for_dist_bound(double dist_bound);
  bool valid() const;
};

/// Range of the final location offset: half the translation range.
struct RegressionBounds {
  Point3 d{0.075, 0.075, 0.075};

  static RegressionBounds from(const TransformBounds& t);
};

/// Per-class anchor size (h, w, l).
struct SizeAnchor {
  BoxSize size;

  static SizeAnchor for_class(ObjectClass c);
};

/// N equal bins over [0, pi).
struct RotationBins {
  int count = 12;

  double width() const;
  double half_width() const { return 0.5 * width(); }
  double center(int i) const { return (i + 0.5) * width(); }
};

/// Head output split into its parts. The flat layout produced by the network
/// is [t_x, t_y, t_z, t_h, t_w, t_l, cls_0..cls_{N-1}, reg_0..reg_{N-1}].
struct RawBoxOutput {
  Point3 t_location;
  std::vector<double> rot_cls;
  std::vector<double> rot_reg;
  Point3 t_size;  // (t_h, t_w, t_l) stored as (x, y, z)

  static RawBoxOutput unpack(std::span<const double> flat, const RotationBins& bins);
  std::vector<double> pack() const;
};

/// Width of the flat head output for the given bins.
std::size_t head_output_width(const RotationBins& bins);

double sigmoid(double t);

/// 2 * (sigmoid(t) - 0.5) * bound and its derivative with respect to t.
double bounded(double t, double bound);
double bounded_derivative(double t, double bound);

/// base^(2 * (sigmoid(t) - 0.5)) and its derivative with respect to t.
double bounded_scale(double t, double base);
double bounded_scale_derivative(double t, double base);

Point3 decode_translation(const Point3& t, const TransformBounds& bounds);
double decode_rotation_transform(double t_r, const TransformBounds& bounds);
std::pair<double, double> decode_scale(double t_xy, double t_z,
                                       const TransformBounds& bounds);
Point3 decode_location(const Point3& t, const RegressionBounds& bounds);

struct EncodedRotation {
  int bin = 0;
  double residual = 0.0;  // in [-1, 1], units of half a bin width
};

EncodedRotation encode_rotation(double yaw, const RotationBins& bins);

/// Argmax bin (lowest index on ties) plus its scaled residual, in [0, pi).
double decode_rotation(std::span<const double> rot_cls,
                       std::span<const double> rot_reg, const RotationBins& bins);

BoxSize decode_size(const Point3& t, const SizeAnchor& anchor);
Point3 encode_size(const BoxSize& size, const SizeAnchor& anchor);

/// Inverse of the bounded decode; |value| is clamped to 0.999 * bound first.
double encode_bounded(double value, double bound);

}  // namespace epbrm
