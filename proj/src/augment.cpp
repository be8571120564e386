#include "epbrm/augment.hpp"

#include "epbrm/errors.hpp"

namespace epbrm {

AugmentConfig AugmentConfig::for_model(const ModelConfig& m) {
  AugmentConfig c;
  c.dist_bound = m.dist_bound;
  c.n_points = m.n_points;
  c.region = m.region();
  c.anchor = m.anchor();
  return c;
}

void AugmentConfig::validate() const {
  if (!(dist_bound > 0.0)) throw ConfigError("dist_bound must be positive");
  if (!(scale_min > 0.0 && scale_min <= scale_max)) throw ConfigError("invalid scale interval");
  if (!(yaw_jitter >= 0.0)) throw ConfigError("yaw jitter must be nonnegative");
  if (n_points < 1) throw ConfigError("n_points must be positive");
  if (!region.valid()) throw ConfigError("invalid sampling region");
}

AugmentDraw draw_augment(const AugmentConfig& cfg, Rng& rng) {
  AugmentDraw d;
  d.scale.x = rng.uniform(cfg.scale_min, cfg.scale_max);
  d.scale.y = rng.uniform(cfg.scale_min, cfg.scale_max);
  d.scale.z = rng.uniform(cfg.scale_min, cfg.scale_max);
  d.yaw_jitter = rng.uniform(-cfg.yaw_jitter, cfg.yaw_jitter);
  d.offset.x = rng.uniform(-cfg.dist_bound, cfg.dist_bound);
  d.offset.y = rng.uniform(-cfg.dist_bound, cfg.dist_bound);
  d.offset.z = rng.uniform(-cfg.dist_bound, cfg.dist_bound);
  return d;
}

PointCloud crop_for_box(const PointCloud& scene, const Box3D& gt, const AugmentConfig& cfg) {
  return crop_cylinder(scene, region_reference(gt.center, cfg.anchor), cfg.region);
}

TrainingSample make_training_sample(const PointCloud& crop, const Box3D& gt,
                                    const AugmentConfig& cfg, const AugmentDraw& draw,
                                    Rng& resample_rng) {
  if (crop.empty()) throw EmptyCloudError("no points inside the sampling region of the box");
  const double heading = gt.yaw + draw.yaw_jitter;
  PointCloud moved;
  moved.reserve(crop.size());
  for (const Point3& p : crop) {
    Point3 q = rotate_z(p - gt.center, -gt.yaw);
    q = {q.x * draw.scale.x, q.y * draw.scale.y, q.z * draw.scale.z};
    moved.push_back(rotate_z(q, heading) - draw.offset);
  }

  TrainingSample s;
  s.draw = draw;
  s.cloud = resample_fixed(moved, static_cast<std::size_t>(cfg.n_points), resample_rng);
  s.target.location = -draw.offset;
  s.target.center_offset = s.target.location;
  s.target.yaw = wrap_angle(heading);
  s.target.size = {gt.size.h * draw.scale.z, gt.size.w * draw.scale.x, gt.size.l * draw.scale.y};
  return s;
}

TrainingSample make_training_sample(const PointCloud& scene, const Box3D& gt,
                                    const AugmentConfig& cfg, Rng& rng) {
  const AugmentDraw draw = draw_augment(cfg, rng);
  return make_training_sample(crop_for_box(scene, gt, cfg), gt, cfg, draw, rng);
}

}  // namespace epbrm
