#include <numbers>

#include "doctest.h"
#include "epbrm/geometry.hpp"
#include "test_support.hpp"

using namespace epbrm;
using epbrm::testing::monte_carlo_iou;
using epbrm::testing::random_box;

namespace {
constexpr double kPi = std::numbers::pi;

Box3D unit_cube(Point3 c = {}, double yaw = 0.0) { return make_box(c, {1, 1, 1}, yaw); }
}  // namespace

TEST_CASE("rotate_z: zero angle is the identity") {
  Rng rng(1);
  PointCloud cloud;
  for (int i = 0; i < 20; ++i) cloud.push_back({rng.normal(), rng.normal(), rng.normal()});
  CHECK(rotate_z(cloud, 0.0) == cloud);
}

TEST_CASE("rotate_z: clockwise quarter turn") {
  const Point3 p = rotate_z(Point3{1, 0, 0}, kPi / 2);
  CHECK(std::abs(p.x) < 1e-12);
  CHECK(std::abs(p.y + 1.0) < 1e-12);
  CHECK(p.z == 0.0);
}

TEST_CASE("rotate_z: inverse composition and rigidity") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    PointCloud c;
    for (int i = 0; i < 10; ++i) {
      c.push_back({rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-5, 5)});
    }
    const double theta = rng.uniform(-10, 10);
    const PointCloud r = rotate_z(c, theta);
    const PointCloud back = rotate_z(r, -theta);
    REQUIRE(back.size() == c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(std::abs(back[i].x - c[i].x) < 1e-9);
      CHECK(std::abs(back[i].y - c[i].y) < 1e-9);
      CHECK(back[i].z == c[i].z);
      for (std::size_t j = 0; j < c.size(); ++j) {
        CHECK(std::abs((r[i] - r[j]).norm() - (c[i] - c[j]).norm()) < 1e-9);
      }
    }
  }
}

TEST_CASE("wrap helpers land in their half-open ranges") {
  for (double a : {-7 * kPi, -kPi, -1e-17, 0.0, kPi, 3 * kPi - 1e-15, 1e6}) {
    const double w = wrap_angle(a);
    CHECK(w >= -kPi);
    CHECK(w < kPi);
    const double h = wrap_half_turn(a);
    CHECK(h >= 0.0);
    CHECK(h < kPi);
  }
  CHECK(wrap_angle(kPi) == doctest::Approx(-kPi));
}

TEST_CASE("box_corners") {
  SUBCASE("axis-aligned unit cube") {
    for (const Point3& c : box_corners(unit_cube())) {
      CHECK(std::abs(std::abs(c.x) - 0.5) < 1e-15);
      CHECK(std::abs(std::abs(c.y) - 0.5) < 1e-15);
      CHECK(std::abs(std::abs(c.z) - 0.5) < 1e-15);
    }
  }
  SUBCASE("quarter turn of a square footprint gives the same corner set") {
    const auto a = box_corners(unit_cube());
    const auto b = box_corners(unit_cube({}, kPi / 2));
    for (const Point3& p : a) {
      bool found = false;
      for (const Point3& q : b) found = found || (p - q).norm() < 1e-12;
      CHECK(found);
    }
  }
  SUBCASE("translation moves every corner") {
    const auto a = box_corners(make_box({}, {1.5, 1.6, 3.9}, 0.3));
    const auto b = box_corners(make_box({1, 2, 3}, {1.5, 1.6, 3.9}, 0.3));
    for (std::size_t i = 0; i < 8; ++i) CHECK(((b[i] - a[i]) - Point3{1, 2, 3}).norm() < 1e-12);
  }
  SUBCASE("z extent is centred") {
    const Box3D box = make_box({0, 0, 2}, {1.5, 1, 1}, 1.0);
    for (const Point3& c : box_corners(box)) {
      CHECK((std::abs(c.z - 1.25) < 1e-12 || std::abs(c.z - 2.75) < 1e-12));
    }
  }
  SUBCASE("length axis follows (sin yaw, cos yaw)") {
    const Box3D box = make_box({}, {1, 1, 4}, 0.4);
    CHECK(box.contains({1.9 * std::sin(0.4), 1.9 * std::cos(0.4), 0}));
    CHECK_FALSE(box.contains({1.9 * std::cos(0.4), -1.9 * std::sin(0.4), 0}));
  }
}

TEST_CASE("iou_3d: fixed cases") {
  const Box3D a = unit_cube();
  CHECK(iou_3d(a, a) == 1.0);
  CHECK(iou_3d(a, unit_cube({10, 0, 0})) == 0.0);
  // Axis-aligned closed form: overlap 0.5 / union (2 - 0.5).
  CHECK(std::abs(iou_3d(a, unit_cube({0.5, 0, 0})) - 1.0 / 3.0) < 1e-9);
  CHECK(std::abs(iou_3d(a, unit_cube({0, 0, 0.5})) - 1.0 / 3.0) < 1e-9);
  // Touching faces have zero volume overlap.
  CHECK(iou_3d(a, unit_cube({1.0, 0, 0})) == 0.0);
  CHECK(iou_3d(a, unit_cube({0, 0, 1.0})) == 0.0);
  // Containment: small box fully inside.
  const Box3D small = make_box({}, {0.5, 0.5, 0.5}, 0.7);
  CHECK(std::abs(iou_3d(a, small) - 0.125) < 1e-9);
}

TEST_CASE("iou_3d agrees with the Monte-Carlo oracle on rotated pairs") {
  Rng rng(11);
  Rng mc(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Box3D a = random_box(rng, 0.5);
    const Box3D b = random_box(rng, 0.5);
    const double exact = iou_3d(a, b);
    CHECK(exact >= 0.0);
    CHECK(exact <= 1.0);
    CHECK(exact == iou_3d(b, a));
    CHECK(std::abs(exact - monte_carlo_iou(a, b, 200000, mc)) < 1e-2);
  }
}

TEST_CASE("iou_3d of boxes equal up to rounding is one") {
  Rng rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    const Box3D a = random_box(rng, 0.5);
    const double e = 1e-12;
    const Box3D b = make_box({a.center.x + rng.uniform(-e, e), a.center.y + rng.uniform(-e, e),
                              a.center.z},
                             {a.size.h, a.size.w * (1 + rng.uniform(-e, e)),
                              a.size.l * (1 + rng.uniform(-e, e))},
                             a.yaw + rng.uniform(-e, e));
    CHECK(iou_3d(a, b) > 1.0 - 1e-9);
    CHECK(iou_3d(b, a) > 1.0 - 1e-9);
  }
  // Quarter turns of a square footprint give the same box.
  for (int k = -2; k < 2; ++k) {
    const Box3D a = make_box({0.3, -0.2, 0}, {1.5, 2, 2}, 0.4);
    const Box3D b = make_box({0.3, -0.2, 0}, {1.5, 2, 2}, 0.4 + k * kPi / 2);
    CHECK(iou_3d(a, b) > 1.0 - 1e-9);
  }
}

TEST_CASE("iou_3d is invariant under a shared rigid motion") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const Box3D a = random_box(rng, 0.6);
    const Box3D b = random_box(rng, 0.6);
    const Point3 shift{rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-2, 2)};
    const double turn = rng.uniform(-kPi, kPi);
    auto move = [&](const Box3D& box) {
      return make_box(rotate_z(box.center, turn) + shift, box.size, box.yaw + turn);
    };
    CHECK(std::abs(iou_3d(a, b) - iou_3d(move(a), move(b))) < 1e-6);
  }
}

TEST_CASE("iou_bev ignores height") {
  const Box3D a = unit_cube();
  const Box3D b = make_box({0.5, 0, 5}, {1, 1, 1}, 0);
  CHECK(iou_3d(a, b) == 0.0);
  CHECK(std::abs(iou_bev(a, b) - 1.0 / 3.0) < 1e-9);
}

TEST_CASE("make_box rejects degenerate sizes") {
  CHECK_THROWS(make_box({}, {0, 1, 1}, 0));
  CHECK_THROWS(make_box({}, {1, -1, 1}, 0));
  CHECK(make_box({}, {1, 1, 1}, 3 * kPi).yaw == doctest::Approx(-kPi));
}
