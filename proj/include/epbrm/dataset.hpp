#pragma once

#include <optional>
#include <string>
#include <vector>

#include "epbrm/geometry.hpp"
#include "epbrm/object_class.hpp"

namespace epbrm {

struct GroundTruth {
  Box3D box;
  ObjectClass object_class = ObjectClass::kCar;
  int occlusion = 0;        // KITTI level 0..3
  double truncation = 0.0;  // fraction in [0, 1]
  std::optional<double> height_px;  // image-plane box height, when known
};

struct Scene {
  std::string id;
  PointCloud cloud;
  std::vector<GroundTruth> ground_truths;

  std::vector<Box3D> boxes_of(ObjectClass c) const;
};

}  // namespace epbrm
