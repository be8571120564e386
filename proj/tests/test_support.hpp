#pragma once

// Shared helpers for the test binaries: random generators and oracles that
// are independent of the code paths they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "epbrm/geometry.hpp"
#include "epbrm/rng.hpp"

namespace epbrm::testing {

inline Box3D random_box(Rng& rng, double spread = 1.0) {
  return make_box({rng.uniform(-spread, spread), rng.uniform(-spread, spread),
                   rng.uniform(-spread, spread)},
                  {rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0.5, 3.0)},
                  rng.uniform(-std::numbers::pi, std::numbers::pi));
}

/// Membership by projecting onto the box axes directly; no corner or polygon code.
inline bool inside_box(const Box3D& b, const Point3& p) {
  const double dx = p.x - b.center.x, dy = p.y - b.center.y;
  const double s = std::sin(b.yaw), c = std::cos(b.yaw);
  const double along_l = dx * s + dy * c;   // length axis (sin, cos)
  const double along_w = dx * c - dy * s;   // width axis (cos, -sin)
  return std::abs(along_w) <= 0.5 * b.size.w && std::abs(along_l) <= 0.5 * b.size.l &&
         std::abs(p.z - b.center.z) <= 0.5 * b.size.h;
}

/// Monte-Carlo IoU: uniform samples in a region enclosing both boxes.
inline double monte_carlo_iou(const Box3D& a, const Box3D& b, int samples, Rng& rng) {
  auto extent = [](const Box3D& box) { return 0.5 * std::hypot(box.size.w, box.size.l); };
  const double x0 = std::min(a.center.x - extent(a), b.center.x - extent(b));
  const double x1 = std::max(a.center.x + extent(a), b.center.x + extent(b));
  const double y0 = std::min(a.center.y - extent(a), b.center.y - extent(b));
  const double y1 = std::max(a.center.y + extent(a), b.center.y + extent(b));
  const double z0 = std::min(a.z_min(), b.z_min()), z1 = std::max(a.z_max(), b.z_max());
  long in_a = 0, in_b = 0, in_both = 0;
  for (int i = 0; i < samples; ++i) {
    const Point3 p{rng.uniform(x0, x1), rng.uniform(y0, y1), rng.uniform(z0, z1)};
    const bool ia = inside_box(a, p), ib = inside_box(b, p);
    in_a += ia;
    in_b += ib;
    in_both += ia && ib;
  }
  const long uni = in_a + in_b - in_both;
  return uni == 0 ? 0.0 : static_cast<double>(in_both) / static_cast<double>(uni);
}

/// Central difference of f at x with step h.
inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace epbrm::testing
