#include "epbrm/sampling.hpp"

#include <numeric>

#include "epbrm/errors.hpp"

namespace epbrm {

SamplingRegion SamplingRegion::for_class(ObjectClass c) {
  switch (c) {
    case ObjectClass::kCar:
      return {2.4, -0.5, 2.5};
    case ObjectClass::kPedestrian:
      return {0.35, -0.5, 2.5};
    case ObjectClass::kCyclist:
      return {0.8, -0.5, 2.5};
  }
  return {};
}

bool SamplingRegion::contains(const Point3& reference, const Point3& p) const {
  const double dx = p.x - reference.x, dy = p.y - reference.y;
  const double dz = p.z - reference.z;
  return dx * dx + dy * dy <= radius * radius && dz >= z_min && dz <= z_max;
}

Point3 region_reference(const Point3& location, const SizeAnchor& anchor) {
  return {location.x, location.y, location.z - 0.5 * anchor.size.h};
}

std::vector<std::size_t> crop_indices(const PointCloud& cloud,
                                      const Point3& reference,
                                      const SamplingRegion& region) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (region.contains(reference, cloud[i])) kept.push_back(i);
  }
  return kept;
}

PointCloud crop_cylinder(const PointCloud& cloud, const Point3& reference,
                         const SamplingRegion& region) {
  PointCloud out;
  for (const Point3& p : cloud) {
    if (region.contains(reference, p)) out.push_back(p);
  }
  return out;
}

std::vector<std::size_t> resample_indices(std::size_t count, std::size_t n,
                                          Rng& rng) {
  if (count == 0) throw EmptyCloudError("cannot resample an empty cloud");
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (count == n) return idx;
  if (count > n) {
    // Partial Fisher-Yates: the first n slots become a uniform subset.
    for (std::size_t i = 0; i < n; ++i) {
      std::swap(idx[i], idx[i + rng.index(count - i)]);
    }
    idx.resize(n);
    return idx;
  }
  idx.reserve(n);
  while (idx.size() < n) idx.push_back(rng.index(count));
  return idx;
}

PointCloud resample_fixed(const PointCloud& cloud, std::size_t n, Rng& rng) {
  const auto idx = resample_indices(cloud.size(), n, rng);
  PointCloud out;
  out.reserve(n);
  for (std::size_t i : idx) out.push_back(cloud[i]);
  return out;
}

}  // namespace epbrm
