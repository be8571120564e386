#pragma once

// Desk-scale stand-ins for KITTI frames and for a localization module.

#include <vector>

#include "epbrm/dataset.hpp"
#include "epbrm/kitti.hpp"
#include "epbrm/rng.hpp"

namespace epbrm {

struct SceneSpec {
  int n_objects = 8;
  ObjectClass object_class = ObjectClass::kCar;
  double range_min = 5.0;    // object distance from the sensor, meters
  double range_max = 40.0;
  double half_fov = 0.8;     // objects lie within +-half_fov radians of +x
  int points_per_object = 400;  // at 10 m; density falls with distance squared
  double ground_density = 0.5;  // points per square meter
  double clutter_rate = 0.05;   // clutter points per square meter
  double sensor_noise = 0.02;   // Gaussian sigma, meters
  double ground_z = -1.73;      // ground plane height in the lidar frame
  int max_retries = 200;

  void validate() const;
};

/// Object boxes rest on the ground, sizes within +-15% of the class anchor,
/// yaw uniform, no two footprints overlapping. Points are sampled on the
/// faces that face the sensor. Throws ConfigError when the objects cannot be
/// placed within the retry budget. When `object_points` is given it receives
/// each object's own points, in ground-truth order.
Scene generate_scene(const SceneSpec& spec, Rng& rng,
                     std::vector<PointCloud>* object_points = nullptr);

/// Axis-aligned calibration with a KITTI-like lever arm and projection
/// matrix, used for synthetic datasets so labels carry image-box heights.
Calibration synthetic_calibration();

/// Image-plane box height of `box` under `calib` (0 when behind the camera
/// or without a projection).
double image_box_height(const Box3D& box, const Calibration& calib);

enum class NoiseKind { kUniform, kGaussian };

struct LocalizerSpec {
  NoiseKind noise = NoiseKind::kUniform;
  double noise_scale = 0.15;      // uniform half-width or Gaussian sigma, meters
  double false_negative_rate = 0.0;
  double false_positives = 0.0;   // expected count per scene
  double score_jitter = 0.05;

  void validate() const;
};

/// One detection per kept ground truth of `object_class` at center + noise,
/// then false positives in free space. Score of a true detection is
/// clamp(1 - |noise| / (2 noise_scale), 0, 1) plus N(0, score_jitter),
/// clamped to [0, 1]; false positives score U(0, 0.5) plus the same jitter.
std::vector<Detection> simulate_localizer(const Scene& scene, ObjectClass object_class,
                                          const LocalizerSpec& spec, Rng& rng);

}  // namespace epbrm
