#pragma once

// Training-sample generator: crop around a ground-truth box, align it, jitter
// scale and heading, and displace the simulated proposal.

#include <numbers>

#include "epbrm/geometry.hpp"
#include "epbrm/loss.hpp"
#include "epbrm/model.hpp"
#include "epbrm/rng.hpp"
#include "epbrm/sampling.hpp"

namespace epbrm {

struct AugmentConfig {
  double dist_bound = 0.15;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double yaw_jitter = std::numbers::pi / 8;
  int n_points = 256;
  SamplingRegion region;
  SizeAnchor anchor;

  static AugmentConfig for_model(const ModelConfig& m);
  void validate() const;
};

/// The random quantities of one sample.
struct AugmentDraw {
  Point3 scale{1.0, 1.0, 1.0};  // (s_x, s_y, s_z) in the aligned frame
  double yaw_jitter = 0.0;
  Point3 offset;  // proposal displacement o from the object center

  static AugmentDraw identity() { return {}; }
};

AugmentDraw draw_augment(const AugmentConfig& cfg, Rng& rng);

struct TrainingSample {
  PointCloud cloud;  // exactly n_points, proposal frame
  BoxTarget target;
  AugmentDraw draw;
};

/// Crop of `scene` used for `gt`; cache it when drawing many samples per box.
PointCloud crop_for_box(const PointCloud& scene, const Box3D& gt, const AugmentConfig& cfg);

/// Applies the draw to a crop from crop_for_box. Throws EmptyCloudError when
/// the crop is empty.
TrainingSample make_training_sample(const PointCloud& crop, const Box3D& gt,
                                    const AugmentConfig& cfg, const AugmentDraw& draw,
                                    Rng& resample_rng);

/// Full generator: crop, draw, transform, resample.
TrainingSample make_training_sample(const PointCloud& scene, const Box3D& gt,
                                    const AugmentConfig& cfg, Rng& rng);

}  // namespace epbrm
