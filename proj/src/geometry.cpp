#include "epbrm/geometry.hpp"

#include <algorithm>
#include <numbers>
#include <tuple>

#include "epbrm/errors.hpp"

namespace epbrm {

namespace {

constexpr double kPi = std::numbers::pi;

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double polygon_area(const std::vector<Point2>& poly) {
  double area = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Point2& p = poly[i];
    const Point2& q = poly[(i + 1) % n];
    area += p.x * q.y - q.x * p.y;
  }
  return 0.5 * area;
}

Point2 edge_crossing(const Point2& p, const Point2& q, double dp, double dq) {
  const double t = dp / (dp - dq);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

}  // namespace

bool Box3D::valid() const {
  return center.finite() && std::isfinite(yaw) && size.h > 0.0 &&
         size.w > 0.0 && size.l > 0.0 && std::isfinite(size.h) &&
         std::isfinite(size.w) && std::isfinite(size.l) && yaw >= -kPi &&
         yaw < kPi;
}

bool Box3D::contains(const Point3& p, double margin) const {
  const Point3 local = to_box_frame(*this, p);
  return std::abs(local.x) <= 0.5 * size.w + margin &&
         std::abs(local.y) <= 0.5 * size.l + margin &&
         std::abs(local.z) <= 0.5 * size.h + margin;
}

Box3D make_box(const Point3& center, const BoxSize& size, double yaw) {
  Box3D box{center, size, wrap_angle(yaw)};
  if (!box.valid()) throw ConfigError("invalid box: non-positive size or non-finite value");
  return box;
}

double wrap_angle(double a) {
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  r -= kPi;
  // fmod rounding can land exactly on +pi.
  if (r >= kPi) r -= 2.0 * kPi;
  return r;
}

double wrap_half_turn(double a) {
  double r = std::fmod(a, kPi);
  if (r < 0.0) r += kPi;
  if (r >= kPi) r -= kPi;
  return r;
}

Point3 rotate_z(const Point3& p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {p.x * c + p.y * s, -p.x * s + p.y * c, p.z};
}

PointCloud rotate_z(const PointCloud& cloud, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  PointCloud out;
  out.reserve(cloud.size());
  for (const Point3& p : cloud) {
    out.push_back({p.x * c + p.y * s, -p.x * s + p.y * c, p.z});
  }
  return out;
}

PointCloud translate(const PointCloud& cloud, const Point3& offset) {
  PointCloud out;
  out.reserve(cloud.size());
  for (const Point3& p : cloud) out.push_back(p + offset);
  return out;
}

Point3 to_box_frame(const Box3D& box, const Point3& p) {
  return rotate_z(p - box.center, -box.yaw);
}

std::array<Point3, 8> box_corners(const Box3D& box) {
  const double hw = 0.5 * box.size.w, hl = 0.5 * box.size.l,
               hh = 0.5 * box.size.h;
  // Local frame is x across width, y along length; rotate_z(local, yaw)
  // returns to the LiDAR frame.
  const std::array<Point2, 4> local{
      {{-hw, -hl}, {hw, -hl}, {hw, hl}, {-hw, hl}}};
  std::array<Point3, 8> corners;
  for (std::size_t i = 0; i < 4; ++i) {
    const Point3 bottom =
        rotate_z(Point3{local[i].x, local[i].y, -hh}, box.yaw) + box.center;
    corners[i] = bottom;
    corners[i + 4] = {bottom.x, bottom.y, bottom.z + box.size.h};
  }
  return corners;
}

std::array<Point2, 4> bev_footprint(const Box3D& box) {
  const auto corners = box_corners(box);
  std::array<Point2, 4> poly;
  for (std::size_t i = 0; i < 4; ++i) poly[i] = {corners[i].x, corners[i].y};
  // A rotation preserves orientation, so the local CCW order survives; the
  // check guards against mirrored inputs.
  std::vector<Point2> tmp(poly.begin(), poly.end());
  if (polygon_area(tmp) < 0.0) std::reverse(poly.begin(), poly.end());
  return poly;
}

// Sutherland-Hodgman clipping of `subject` against each edge of convex `clip`.
double convex_intersection_area(const std::vector<Point2>& subject,
                                const std::vector<Point2>& clip) {
  std::vector<Point2> output = subject;
  for (std::size_t e = 0, m = clip.size(); e < m && !output.empty(); ++e) {
    const Point2& c1 = clip[e];
    const Point2& c2 = clip[(e + 1) % m];
    std::vector<Point2> input;
    input.swap(output);
    for (std::size_t i = 0, n = input.size(); i < n; ++i) {
      const Point2& cur = input[i];
      const Point2& prev = input[(i + n - 1) % n];
      const double d_cur = cross(c1, c2, cur);
      const double d_prev = cross(c1, c2, prev);
      if (d_cur >= 0.0) {
        if (d_prev < 0.0) output.push_back(edge_crossing(prev, cur, d_prev, d_cur));
        output.push_back(cur);
      } else if (d_prev >= 0.0) {
        output.push_back(edge_crossing(prev, cur, d_prev, d_cur));
      }
    }
  }
  if (output.size() < 3) return 0.0;
  return std::max(0.0, polygon_area(output));
}

namespace {

// Argument order is canonicalised so that the result is exactly symmetric.
bool box_less(const Box3D& a, const Box3D& b) {
  return std::tie(a.center.x, a.center.y, a.center.z, a.yaw, a.size.h, a.size.w, a.size.l) <
         std::tie(b.center.x, b.center.y, b.center.z, b.yaw, b.size.h, b.size.w, b.size.l);
}

double footprint_intersection(const Box3D& a, const Box3D& b) {
  const auto pa = bev_footprint(a);
  const auto pb = bev_footprint(b);
  return convex_intersection_area({pa.begin(), pa.end()}, {pb.begin(), pb.end()});
}

bool footprints_may_overlap(const Box3D& a, const Box3D& b) {
  const double ra = 0.5 * std::hypot(a.size.w, a.size.l);
  const double rb = 0.5 * std::hypot(b.size.w, b.size.l);
  return std::hypot(a.center.x - b.center.x, a.center.y - b.center.y) <= ra + rb;
}

}  // namespace

double iou_bev(const Box3D& first, const Box3D& second) {
  if (first == second) return 1.0;
  const bool swap = box_less(second, first);
  const Box3D& a = swap ? second : first;
  const Box3D& b = swap ? first : second;
  if (!footprints_may_overlap(a, b)) return 0.0;
  const double inter = footprint_intersection(a, b);
  const double uni = a.size.w * a.size.l + b.size.w * b.size.l - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double iou_3d(const Box3D& first, const Box3D& second) {
  if (first == second) return 1.0;
  const bool swap = box_less(second, first);
  const Box3D& a = swap ? second : first;
  const Box3D& b = swap ? first : second;
  const double dz = std::min(a.z_max(), b.z_max()) - std::max(a.z_min(), b.z_min());
  if (dz <= 0.0 || !footprints_may_overlap(a, b)) return 0.0;
  const double inter = footprint_intersection(a, b) * dz;
  const double uni = a.volume() + b.volume() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

}  // namespace epbrm
