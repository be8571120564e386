#pragma once

#include <cstddef>
#include <vector>

#include "epbrm/boxcodec.hpp"
#include "epbrm/geometry.hpp"
#include "epbrm/object_class.hpp"
#include "epbrm/rng.hpp"

namespace epbrm {

/// Vertical cylinder: horizontal radius and a z band relative to the
/// reference point's z.
struct SamplingRegion {
  double radius = 2.4;
  double z_min = -0.5;
  double z_max = 2.5;

  static SamplingRegion for_class(ObjectClass c);
  bool valid() const { return radius > 0.0 && z_min < z_max; }
  bool contains(const Point3& reference, const Point3& p) const;
};

/// Reference point of the cylinder for a proposal at `location`: the z band
/// is measured from the bottom of an anchor-sized box centred there.
Point3 region_reference(const Point3& location, const SizeAnchor& anchor);

/// Points inside the region around `reference`, in input order.
PointCloud crop_cylinder(const PointCloud& cloud, const Point3& reference,
                         const SamplingRegion& region);

/// Indices of the points crop_cylinder would keep.
std::vector<std::size_t> crop_indices(const PointCloud& cloud,
                                      const Point3& reference,
                                      const SamplingRegion& region);

/// Indices into a cloud of `count` points giving exactly n samples: identity
/// when count == n, a uniform subset without replacement when count > n, and
/// all points followed by uniform draws with replacement when count < n.
/// Throws EmptyCloudError when count == 0.
std::vector<std::size_t> resample_indices(std::size_t count, std::size_t n,
                                          Rng& rng);

PointCloud resample_fixed(const PointCloud& cloud, std::size_t n, Rng& rng);

}  // namespace epbrm
