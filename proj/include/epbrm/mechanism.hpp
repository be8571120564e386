#pragma once

// Spatial transformation stages. Each stage predicts parameters describing the
// object's pose in the current frame and normalises the cloud by undoing them:
//   translation / centering: p' = p - offset
//   rotation:                p' = rotate_z(p, -angle)
//   scaling:                 p' = (x / s_xy, y / s_xy, z / s_z)

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epbrm/boxcodec.hpp"
#include "epbrm/geometry.hpp"

namespace epbrm {

enum class Mechanism { kTranslation, kCentering, kRotation, kScaling };

std::string_view mechanism_name(Mechanism m);

/// Accepts translation, centering (or center), rotation, scaling (or scale).
Mechanism parse_mechanism(std::string_view name);

/// Comma-separated list; "none" or "" gives an empty list.
std::vector<Mechanism> parse_mechanisms(std::string_view list);
std::string format_mechanisms(const std::vector<Mechanism>& mechanisms);

/// Number of raw outputs the stage's block must produce.
int mechanism_output_width(Mechanism m);

/// Decoded stage parameters.
struct StageTransform {
  Mechanism kind = Mechanism::kTranslation;
  Point3 offset;
  double angle = 0.0;
  double scale_xy = 1.0;
  double scale_z = 1.0;

  Point3 apply(const Point3& p) const;
  Point3 unapply(const Point3& p) const;

  /// Box as seen in the stage's output frame, and the inverse.
  Box3D apply(const Box3D& box) const;
  Box3D unapply(const Box3D& box) const;
};

StageTransform decode_stage(Mechanism kind, std::span<const double> raw,
                            const TransformBounds& bounds);

/// Gradient with respect to a box's center, yaw and size.
struct BoxGrad {
  Point3 center;
  double yaw = 0.0;
  Point3 size;  // (h, w, l) as (x, y, z)
};

/// Backward of StageTransform::apply(Point3). Adds the gradient with respect to
/// the stage's raw outputs into `d_raw` and returns the gradient with respect
/// to the input point.
Point3 apply_backward(const StageTransform& tr, std::span<const double> raw,
                      const TransformBounds& bounds, const Point3& p,
                      const Point3& d_out, std::span<double> d_raw);

/// Backward of StageTransform::apply(Box3D).
BoxGrad apply_backward(const StageTransform& tr, std::span<const double> raw,
                       const TransformBounds& bounds, const Box3D& box,
                       const BoxGrad& d_out, std::span<double> d_raw);

}  // namespace epbrm
