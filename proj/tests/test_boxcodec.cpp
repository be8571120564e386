#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "epbrm/boxcodec.hpp"
#include "test_support.hpp"

using namespace epbrm;
using epbrm::testing::central_difference;

namespace {
constexpr double kPi = std::numbers::pi;
const double kLn3 = std::log(3.0);

double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / scale;
}
}  // namespace

TEST_CASE("decode_translation") {
  const TransformBounds b = TransformBounds::for_dist_bound(0.15);
  const Point3 zero = decode_translation({0, 0, 0}, b);
  CHECK(zero == Point3{0, 0, 0});
  CHECK(std::abs(decode_translation({kLn3, 0, 0}, b).x - 0.075) < 1e-16);
  const Point3 big = decode_translation({50, -50, 1e3}, b);
  CHECK(std::abs(big.x) < 0.15);
  CHECK(std::abs(big.y) < 0.15);
  CHECK(std::abs(big.z) < 0.15);
  CHECK(big.x > 0.1499);
}

TEST_CASE("decode_rotation_transform") {
  const TransformBounds b;
  CHECK(b.rotation == doctest::Approx(kPi / 4));
  CHECK(decode_rotation_transform(0.0, b) == 0.0);
  CHECK(std::abs(decode_rotation_transform(kLn3, b) - kPi / 8) < 1e-15);
  CHECK(std::abs(decode_rotation_transform(50, b)) < kPi / 4);
  CHECK(std::abs(decode_rotation_transform(-50, b)) < kPi / 4);
}

TEST_CASE("decode_scale") {
  const TransformBounds b;
  const auto [sxy, sz] = decode_scale(0.0, 0.0, b);
  CHECK(sxy == 1.0);
  CHECK(sz == 1.0);
  CHECK(std::abs(decode_scale(kLn3, kLn3, b).first - std::sqrt(2.0)) < 1e-12);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double t = rng.uniform(-10, 10);
    CHECK(std::abs(bounded_scale(-t, 2.0) - 1.0 / bounded_scale(t, 2.0)) < 1e-12);
  }
}

TEST_CASE("decode_location uses half the translation bound") {
  const RegressionBounds r = RegressionBounds::from(TransformBounds::for_dist_bound(0.15));
  CHECK(r.d.x == 0.075);
  CHECK(decode_location({0, 0, 0}, r) == Point3{0, 0, 0});
  CHECK(std::abs(decode_location({kLn3, 0, 0}, r).x - 0.0375) < 1e-16);
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double t = rng.uniform(-100, 100);
    CHECK(std::abs(decode_location({t, t, t}, r).x) < 0.075);
  }
}

TEST_CASE("bounded decodes stay inside their open ranges for any finite input") {
  const TransformBounds b = TransformBounds::for_dist_bound(0.3);
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double t = rng.uniform(-100, 100);
    CHECK(std::abs(bounded(t, 0.3)) < 0.3);
    CHECK(std::abs(decode_rotation_transform(t, b)) < b.rotation);
    const double s = bounded_scale(t, 2.0);
    CHECK(s < 2.0);
    CHECK(s > 0.5);
  }
}

TEST_CASE("analytic derivatives match central differences") {
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const double t = rng.uniform(-6, 6);
    const double bound = rng.uniform(0.05, 2.0);
    const double base = rng.uniform(1.2, 3.0);
    CHECK(rel_err(bounded_derivative(t, bound),
                  central_difference([&](double x) { return bounded(x, bound); }, t, 1e-4)) <
          1e-5);
    CHECK(rel_err(bounded_scale_derivative(t, base),
                  central_difference([&](double x) { return bounded_scale(x, base); }, t,
                                     1e-4)) < 1e-5);
    // Size decode derivative is anchor * exp(t).
    const SizeAnchor a = SizeAnchor::for_class(ObjectClass::kCar);
    CHECK(rel_err(decode_size({t, 0, 0}, a).h,
                  central_difference([&](double x) { return decode_size({x, 0, 0}, a).h; }, t,
                                     1e-4)) < 1e-5);
  }
}

TEST_CASE("encode_rotation") {
  const RotationBins bins{12};
  for (int k = 0; k < 12; ++k) {
    const EncodedRotation e = encode_rotation(bins.center(k), bins);
    CHECK(e.bin == k);
    CHECK(std::abs(e.residual) < 1e-12);
  }
  const EncodedRotation e = encode_rotation(0.01, bins);
  CHECK(e.bin == 0);
  CHECK(std::abs(e.residual - (0.01 - kPi / 24) / (kPi / 24)) < 1e-12);

  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double theta = rng.uniform(0, kPi);
    const EncodedRotation a = encode_rotation(theta, bins);
    const EncodedRotation b = encode_rotation(theta + kPi, bins);
    const EncodedRotation c = encode_rotation(theta - kPi, bins);
    CHECK(a.bin == b.bin);
    CHECK(a.bin == c.bin);
    CHECK(std::abs(a.residual - b.residual) < 1e-9);
    CHECK(a.residual >= -1.0 - 1e-12);
    CHECK(a.residual <= 1.0 + 1e-12);
  }
}

TEST_CASE("decode_rotation") {
  const RotationBins bins{12};
  std::vector<double> reg(12, 0.0);
  for (int k = 0; k < 12; ++k) {
    std::vector<double> cls(12, 0.0);
    cls[static_cast<std::size_t>(k)] = 5.0;
    CHECK(std::abs(decode_rotation(cls, reg, bins) - bins.center(k)) < 1e-15);
  }
  SUBCASE("uniform logits pick bin 0") {
    const std::vector<double> cls(12, 0.3);
    CHECK(std::abs(decode_rotation(cls, reg, bins) - kPi / 24) < 1e-15);
  }
  SUBCASE("round trip over [0, pi)") {
    for (int n_bins : {2, 7, 12, 24}) {
      const RotationBins b{n_bins};
      for (int i = 0; i < 2000; ++i) {
        const double theta = kPi * i / 2000.0;
        const EncodedRotation e = encode_rotation(theta, b);
        std::vector<double> cls(static_cast<std::size_t>(n_bins), 0.0);
        std::vector<double> r(static_cast<std::size_t>(n_bins), 0.0);
        cls[static_cast<std::size_t>(e.bin)] = 1.0;
        r[static_cast<std::size_t>(e.bin)] = e.residual;
        const double back = decode_rotation(cls, r, b);
        CHECK(std::abs(back - theta) < 1e-9);
      }
    }
  }
  SUBCASE("mismatched lengths are rejected") {
    CHECK_THROWS(decode_rotation(std::vector<double>(11, 0.0), reg, bins));
  }
}

TEST_CASE("decode_size") {
  const SizeAnchor car = SizeAnchor::for_class(ObjectClass::kCar);
  const BoxSize s = decode_size({0, 0, 0}, car);
  CHECK(s == BoxSize{1.50, 1.57, 3.33});
  CHECK(std::abs(decode_size({0, 0, std::log(2.0)}, car).l - 6.66) < 1e-12);
  CHECK(SizeAnchor::for_class(ObjectClass::kPedestrian).size == BoxSize{1.73, 0.60, 0.80});
  CHECK(SizeAnchor::for_class(ObjectClass::kCyclist).size == BoxSize{1.73, 0.60, 1.76});
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const Point3 t{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const Point3 back = encode_size(decode_size(t, car), car);
    CHECK(std::abs(back.x - t.x) < 1e-12);
    CHECK(std::abs(back.y - t.y) < 1e-12);
    CHECK(std::abs(back.z - t.z) < 1e-12);
  }
}

TEST_CASE("encode_bounded inverts the bounded decode inside the clamp") {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-0.9, 0.9) * 0.15;
    CHECK(std::abs(bounded(encode_bounded(v, 0.15), 0.15) - v) < 1e-12);
  }
  CHECK(std::abs(bounded(encode_bounded(1.0, 0.15), 0.15) - 0.999 * 0.15) < 1e-12);
}

TEST_CASE("raw head output packing") {
  const RotationBins bins{4};
  std::vector<double> flat(head_output_width(bins));
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = static_cast<double>(i);
  const RawBoxOutput raw = RawBoxOutput::unpack(flat, bins);
  CHECK(raw.t_location == Point3{0, 1, 2});
  CHECK(raw.t_size == Point3{3, 4, 5});
  CHECK(raw.rot_cls == std::vector<double>{6, 7, 8, 9});
  CHECK(raw.rot_reg == std::vector<double>{10, 11, 12, 13});
  CHECK(raw.pack() == flat);
  CHECK_THROWS_AS(RawBoxOutput::unpack(std::vector<double>(5), bins), std::exception);
}
