#pragma once

// Batch refinement of localizer detections into oriented boxes.

#include <cstdint>
#include <vector>

#include "epbrm/geometry.hpp"
#include "epbrm/model.hpp"

namespace epbrm {

struct RefineConfig {
  std::uint64_t seed = 0;  // root of the per-detection resampling streams
  int threads = 1;
};

/// Refines every detection independently. Output order, count and scores
/// equal the input's; no suppression is applied. A detection whose crop is
/// empty, or whose transforms expel every point, is returned without a box
/// and with `unrefined` set.
std::vector<Detection> refine(const std::vector<Detection>& detections, const PointCloud& scene,
                              const EpbrmModel<float>& model, const RefineConfig& cfg = {});

/// Proposal crop in the proposal frame, resampled to n_points.
/// Returns an empty cloud when no point lies in the region.
PointCloud proposal_cloud(const PointCloud& scene, const Point3& location,
                          const ModelConfig& config, Rng& rng);

/// The box an unrefined proposal implies: anchor size at the proposal.
Box3D anchor_box(const Point3& location, const ModelConfig& config, double yaw);

}  // namespace epbrm
