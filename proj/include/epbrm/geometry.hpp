#pragma once

// Oriented-box and point-cloud primitives in the LiDAR frame (x forward,
// y left, z up, meters).
//
// Yaw convention: a box with yaw psi has its length axis along
// (sin psi, cos psi) and its width axis along (cos psi, -sin psi), i.e. yaw
// is a clockwise rotation about +z starting from the +y axis. rotate_z(p, a)
// turns an object of yaw psi into one of yaw psi + a.

#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace epbrm {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Point3& operator+=(const Point3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  Point3& operator-=(const Point3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  friend Point3 operator+(Point3 a, const Point3& b) { return a += b; }
  friend Point3 operator-(Point3 a, const Point3& b) { return a -= b; }
  friend Point3 operator*(double s, const Point3& p) {
    return {s * p.x, s * p.y, s * p.z};
  }
  friend Point3 operator*(const Point3& p, double s) { return s * p; }
  friend Point3 operator-(const Point3& p) { return {-p.x, -p.y, -p.z}; }
  friend bool operator==(const Point3&, const Point3&) = default;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

using PointCloud = std::vector<Point3>;

/// Box extent: height along z, width and length in the ground plane.
struct BoxSize {
  double h = 0.0;
  double w = 0.0;
  double l = 0.0;
  friend bool operator==(const BoxSize&, const BoxSize&) = default;
};

/// Oriented 3D box. `center` is the volumetric centroid.
struct Box3D {
  Point3 center;
  BoxSize size;
  double yaw = 0.0;  // radians, [-pi, pi)

  friend bool operator==(const Box3D&, const Box3D&) = default;

  bool valid() const;
  double volume() const { return size.h * size.w * size.l; }
  double z_min() const { return center.z - 0.5 * size.h; }
  double z_max() const { return center.z + 0.5 * size.h; }
  /// True when p lies inside the closed box.
  bool contains(const Point3& p, double margin = 0.0) const;
};

/// Builds a box with yaw normalised into [-pi, pi). Throws ConfigError when
/// the result violates the Box3D invariants.
Box3D make_box(const Point3& center, const BoxSize& size, double yaw);

/// A localizer output, optionally carrying a refined box.
struct Detection {
  Point3 location;
  double score = 0.0;
  std::optional<Box3D> box;
  /// Set by refinement when no box could be produced (empty crop).
  bool unrefined = false;
};

/// Wraps an angle into [-pi, pi).
double wrap_angle(double a);

/// Wraps an angle into [0, pi).
double wrap_half_turn(double a);

/// Clockwise rotation about z: (x, y) -> (x cos a + y sin a, -x sin a + y cos a).
Point3 rotate_z(const Point3& p, double angle);
PointCloud rotate_z(const PointCloud& cloud, double angle);

PointCloud translate(const PointCloud& cloud, const Point3& offset);

/// Coordinates of p in the box frame: (across width, along length, up).
Point3 to_box_frame(const Box3D& box, const Point3& p);

/// The 8 corners; first four on the bottom face, counter-clockwise seen from
/// above, then the matching top-face corners.
std::array<Point3, 8> box_corners(const Box3D& box);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Counter-clockwise ground-plane footprint of the box.
std::array<Point2, 4> bev_footprint(const Box3D& box);

/// Area of the intersection of two convex polygons given counter-clockwise.
double convex_intersection_area(const std::vector<Point2>& a,
                                const std::vector<Point2>& b);

/// Ground-plane IoU of the two footprints. Not used by the metrics.
double iou_bev(const Box3D& a, const Box3D& b);

/// Volumetric IoU: exact footprint intersection times z-interval overlap.
double iou_3d(const Box3D& a, const Box3D& b);

}  // namespace epbrm
