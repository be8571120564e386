#include "epbrm/refine.hpp"

#include <algorithm>
#include <thread>

#include "epbrm/errors.hpp"
#include "epbrm/sampling.hpp"

namespace epbrm {

namespace {

constexpr std::uint64_t kRefineSalt = 0x2ef1;

}  // namespace

PointCloud proposal_cloud(const PointCloud& scene, const Point3& location,
                          const ModelConfig& config, Rng& rng) {
  PointCloud crop =
      crop_cylinder(scene, region_reference(location, config.anchor()), config.region());
  if (crop.empty()) return crop;
  for (Point3& p : crop) p -= location;
  return resample_fixed(crop, static_cast<std::size_t>(config.n_points), rng);
}

Box3D anchor_box(const Point3& location, const ModelConfig& config, double yaw) {
  return make_box(location, config.anchor().size, yaw);
}

std::vector<Detection> refine(const std::vector<Detection>& detections, const PointCloud& scene,
                              const EpbrmModel<float>& model, const RefineConfig& cfg) {
  std::vector<Detection> out = detections;
  auto work = [&](std::size_t i) {
    Detection& d = out[i];
    d.box.reset();
    d.unrefined = true;
    Rng rng = Rng::stream(cfg.seed, i, kRefineSalt);
    const PointCloud cloud = proposal_cloud(scene, d.location, model.config, rng);
    if (cloud.empty()) return;
    ForwardOptions opts;
    opts.seed = rng.next();
    EpbrmCache<float> cache;
    try {
      const BoxPrediction pred = epbrm_forward(to_matrix<float>(cloud), model, opts, cache);
      Box3D box = pred.box;
      box.center += d.location;
      d.box = box;
      d.unrefined = false;
    } catch (const StageCropError&) {
    }
  };

  const std::size_t n = out.size();
  const std::size_t threads =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, cfg.threads)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) work(i);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace epbrm
