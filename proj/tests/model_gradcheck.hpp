#pragma once

// Full-model gradient check shared by the unit tests and the acceptance suite.
// The objective is the multi-task loss on a random target, so the check covers
// the head, every stage block, the stage transforms, the target tracer and the
// centering supervision. Crop membership and resampling are replayed from the
// unperturbed pass.

#include <algorithm>
#include <numbers>

#include "epbrm/loss.hpp"
#include "epbrm/model.hpp"
#include "gradcheck.hpp"

namespace epbrm::testing {

inline ModelConfig gradcheck_config(const std::vector<Mechanism>& mechanisms, int n_points) {
  ModelConfig c;
  c.mechanisms = mechanisms;
  c.n_points = n_points;
  c.point_widths = {8, 16, 32};
  c.head_widths = {16};
  return c;
}

/// Points scattered through a car-sized volume around the origin.
inline Matrix<double> car_like_cloud(Rng& rng, int n) {
  Matrix<double> m(3, n);
  for (int j = 0; j < n; ++j) {
    m(0, j) = rng.uniform(-1.0, 1.0);
    m(1, j) = rng.uniform(-2.0, 2.0);
    m(2, j) = rng.uniform(-0.7, 0.7);
  }
  return m;
}

inline BoxTarget random_target(Rng& rng, double dist_bound) {
  BoxTarget t;
  t.location = {rng.uniform(-dist_bound, dist_bound), rng.uniform(-dist_bound, dist_bound),
                rng.uniform(-dist_bound, dist_bound)};
  t.center_offset = t.location;
  t.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
  t.size = {rng.uniform(1.3, 1.7), rng.uniform(1.4, 1.8), rng.uniform(3.0, 3.7)};
  return t;
}

struct ModelGradientErrors {
  double params = 0.0;
  double input = 0.0;
  double worst() const { return std::max(params, input); }
};

inline ModelGradientErrors model_gradient_errors(const ModelConfig& cfg, std::uint64_t seed,
                                                 double step = 1e-6) {
  Rng rng = Rng::stream(seed, 1, 0x9c);
  const int n_points = cfg.n_points;
  auto model = EpbrmModel<double>::init(cfg, seed);
  // Jitter every parameter: zero biases put ReLU inputs of fully-dead points
  // exactly on the kink, where the central difference is not a derivative.
  model.for_each_tensor([&rng](Eigen::Map<Matrix<double>> t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += rng.uniform(-0.05, 0.05);
  });
  Matrix<double> cloud = car_like_cloud(rng, n_points);
  const BoxTarget target = random_target(rng, 0.1);

  ForwardOptions opts;
  opts.seed = seed;
  EpbrmCache<double> cache;
  const BoxPrediction pred = epbrm_forward(cloud, model, opts, cache);
  const LossResult loss = multitask_loss(pred, target, cfg);
  Matrix<double> d_cloud;
  const auto grads = epbrm_backward(model, pred, cache, loss.grad, &d_cloud);

  const StageSelections frozen = cache.selections;
  ForwardOptions replay = opts;
  replay.replay = &frozen;
  auto objective = [&]() {
    EpbrmCache<double> c;
    return multitask_loss(epbrm_forward(cloud, model, replay, c), target, cfg).loss.total;
  };

  ModelGradientErrors out;
  out.params = relative_error(flatten(grads), numeric_gradient(model, objective, step));
  std::vector<double> analytic_x(d_cloud.data(), d_cloud.data() + d_cloud.size());
  std::vector<double> numeric_x;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    double& v = cloud.data()[i];
    const double saved = v;
    v = saved + step;
    const double plus = objective();
    v = saved - step;
    const double minus = objective();
    v = saved;
    numeric_x.push_back((plus - minus) / (2.0 * step));
  }
  out.input = relative_error(analytic_x, numeric_x);
  return out;
}

inline ModelGradientErrors model_gradient_errors(const std::vector<Mechanism>& mechanisms,
                                                 std::uint64_t seed, int n_points = 32,
                                                 double step = 1e-6) {
  return model_gradient_errors(gradcheck_config(mechanisms, n_points), seed, step);
}

}  // namespace epbrm::testing
