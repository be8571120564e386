#include <cmath>

#include "doctest.h"
#include "epbrm/errors.hpp"
#include "epbrm/model.hpp"
#include "model_gradcheck.hpp"

using namespace epbrm;
using epbrm::testing::car_like_cloud;
using epbrm::testing::flatten;
using epbrm::testing::gradcheck_config;
using epbrm::testing::model_gradient_errors;

namespace {

using M = Mechanism;

// Uniform samples on the six faces of a box, area-weighted, in antithetic
// pairs mirrored through the center so the point centroid is the box center.
PointCloud box_surface(const Box3D& b, int n, Rng& rng) {
  const double h = b.size.h, w = b.size.w, l = b.size.l;
  const double areas[3] = {w * l, h * l, h * w};  // top/bottom, sides, front/back
  const double total = 2 * (areas[0] + areas[1] + areas[2]);
  PointCloud out;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform(0, total);
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    double a = rng.uniform(-0.5, 0.5), c = rng.uniform(-0.5, 0.5);
    double along_w, along_l, up;
    if (u < 2 * areas[0]) {
      along_w = a * w, along_l = c * l, up = sign * 0.5 * h;
    } else if (u < 2 * (areas[0] + areas[1])) {
      along_w = sign * 0.5 * w, along_l = c * l, up = a * h;
    } else {
      along_w = a * w, along_l = sign * 0.5 * l, up = c * h;
    }
    const double s = std::sin(b.yaw), co = std::cos(b.yaw);
    out.push_back({b.center.x + along_w * co + along_l * s,
                   b.center.y - along_w * s + along_l * co, b.center.z + up});
    out.push_back({b.center.x - along_w * co - along_l * s,
                   b.center.y + along_w * s - along_l * co, b.center.z - up});
  }
  return out;
}

Point3 centroid(const Matrix<double>& m) {
  const Vector<double> c = m.rowwise().mean();
  return {c(0), c(1), c(2)};
}

}  // namespace

TEST_CASE("full-model gradients match finite differences for every mechanism combination") {
  const std::vector<std::vector<M>> combos = {
      {},
      {M::kTranslation},
      {M::kCentering},
      {M::kRotation},
      {M::kScaling},
      {M::kTranslation, M::kRotation},
      {M::kCentering, M::kRotation},
      {M::kCentering, M::kScaling},
      {M::kCentering, M::kRotation, M::kScaling},
  };
  for (const auto& combo : combos) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto err = model_gradient_errors(combo, seed);
      INFO("mechanisms " << format_mechanisms(combo) << " seed " << seed);
      CHECK(err.params < 1e-4);
      CHECK(err.input < 1e-4);
    }
  }
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  Rng rng(5);
  const auto cfg = gradcheck_config({M::kCentering, M::kRotation}, 32);
  const auto model = EpbrmModel<double>::init(cfg, 5);
  EpbrmCache<double> cache;
  const auto pred = epbrm_forward(car_like_cloud(rng, 32), model, {}, cache);
  const auto grads = epbrm_backward(model, pred, cache, PredictionGrad::zeros_for(pred));
  for (double g : flatten(grads)) REQUIRE(g == 0.0);
}

TEST_CASE("without stages the model gradient is the head block gradient") {
  Rng rng(6);
  const auto cfg = gradcheck_config({}, 32);
  const auto model = EpbrmModel<double>::init(cfg, 6);
  const Matrix<double> cloud = car_like_cloud(rng, 32);
  EpbrmCache<double> cache;
  const auto pred = epbrm_forward(cloud, model, {}, cache);
  PredictionGrad d = PredictionGrad::zeros_for(pred);
  for (double& v : d.head_raw) v = rng.normal();
  const auto grads = epbrm_backward(model, pred, cache, d);

  BlockCache<double> bc;
  block_forward(cloud, model.head, bc);
  BlockParams<double> head_grads;
  block_backward(bc, model.head, Vector<double>(Eigen::Map<const Vector<double>>(
                                     d.head_raw.data(), static_cast<Eigen::Index>(d.head_raw.size()))),
                 head_grads);
  CHECK(flatten(grads) == flatten(head_grads));
}

TEST_CASE("decoded location offset stays inside the regression bound") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto cfg = gradcheck_config(trial % 2 ? std::vector<M>{M::kCentering} : std::vector<M>{}, 32);
    cfg.dist_bound = rng.uniform(0.05, 0.6);
    auto model = EpbrmModel<double>::init(cfg, static_cast<std::uint64_t>(trial));
    // Large weights push the head toward saturation.
    model.head.for_each_tensor([](Eigen::Map<Matrix<double>> t) { t *= 40.0; });
    EpbrmCache<double> cache;
    const auto pred = epbrm_forward(car_like_cloud(rng, 32), model, {}, cache);
    const double d = 0.5 * cfg.dist_bound;
    CHECK(std::abs(pred.location.x) < d);
    CHECK(std::abs(pred.location.y) < d);
    CHECK(std::abs(pred.location.z) < d);
  }
}

TEST_CASE("a centering stage forced to the true center moves the object toward the origin") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const double phi = rng.uniform(0, 2 * std::numbers::pi);
    const Point3 offset{0.1 * std::cos(phi), 0.1 * std::sin(phi), 0.0};
    const Box3D object = make_box(offset, {1.5, 1.6, 3.4}, rng.uniform(-3, 3));
    const PointCloud surface = box_surface(object, 128, rng);

    auto cfg = gradcheck_config({M::kCentering}, 256);
    auto model = EpbrmModel<double>::init(cfg, 9);
    // Oracle stage: zero final weights, bias encoding the true center.
    auto& last = model.stages[0].block.head_layers.back();
    last.weight.setZero();
    const double t = cfg.transform_bounds().translation.x;
    last.bias << encode_bounded(offset.x, t), encode_bounded(offset.y, t),
        encode_bounded(offset.z, t);

    EpbrmCache<double> cache;
    epbrm_forward(surface, model, {}, cache);
    const Point3 before = centroid(cache.stage_inputs[0]);
    const Point3 after = centroid(cache.head_input);
    CHECK(after.norm() < before.norm());
  }
}

TEST_CASE("a stage that expels every point reports its index") {
  Rng rng(10);
  auto cfg = gradcheck_config({M::kTranslation, M::kScaling}, 32);
  auto model = EpbrmModel<double>::init(cfg, 10);
  // Scaling stage squeezed to the minimum blows points outward 2x; put all
  // points just inside the radius so they leave the region.
  auto& last = model.stages[1].block.head_layers.back();
  last.weight.setZero();
  last.bias << -60.0, -60.0;
  Matrix<double> cloud(3, 32);
  for (int j = 0; j < 32; ++j) {
    const double a = 2 * std::numbers::pi * j / 32.0;
    cloud.col(j) << 2.3 * std::cos(a), 2.3 * std::sin(a), 0.0;
  }
  EpbrmCache<double> cache;
  try {
    epbrm_forward(cloud, model, {}, cache);
    FAIL("expected StageCropError");
  } catch (const StageCropError& e) {
    CHECK(e.stage() == 1);
  }
}

TEST_CASE("forward is deterministic and float agrees with double") {
  Rng rng(11);
  const auto cfg = gradcheck_config({M::kCentering, M::kRotation}, 32);
  const auto model = EpbrmModel<double>::init(cfg, 11);
  const Matrix<double> cloud = car_like_cloud(rng, 32);
  EpbrmCache<double> c1, c2;
  const auto a = epbrm_forward(cloud, model, {}, c1);
  const auto b = epbrm_forward(cloud, model, {}, c2);
  CHECK(a.head_raw == b.head_raw);

  const auto model_f = model.cast<float>();
  EpbrmCache<float> cf;
  const auto f = epbrm_forward(Matrix<float>(cloud.cast<float>()), model_f, {}, cf);
  for (std::size_t i = 0; i < a.head_raw.size(); ++i) {
    CHECK(f.head_raw[i] == doctest::Approx(a.head_raw[i]).epsilon(1e-3));
  }
}
