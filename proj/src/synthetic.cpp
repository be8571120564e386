#include "epbrm/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "epbrm/boxcodec.hpp"
#include "epbrm/errors.hpp"

namespace epbrm {

namespace {

// Footprints closer than this are treated as overlapping.
constexpr double kPlacementGap = 0.5;

Box3D dilated(const Box3D& b, double margin) {
  return {b.center, {b.size.h + 2 * margin, b.size.w + 2 * margin, b.size.l + 2 * margin}, b.yaw};
}

struct Face {
  Point3 center;
  Point3 normal;
  Point3 u, v;  // half-extent vectors spanning the face
  double area;
};

std::vector<Face> faces_of(const Box3D& b) {
  const double s = std::sin(b.yaw), c = std::cos(b.yaw);
  const Point3 len{s, c, 0.0}, wid{c, -s, 0.0}, up{0.0, 0.0, 1.0};
  const Point3 hl = len * (0.5 * b.size.l), hw = wid * (0.5 * b.size.w), hh = up * (0.5 * b.size.h);
  std::vector<Face> out;
  for (double sign : {1.0, -1.0}) {
    out.push_back({b.center + hl * sign, len * sign, hw, hh, b.size.w * b.size.h});
    out.push_back({b.center + hw * sign, wid * sign, hl, hh, b.size.l * b.size.h});
    out.push_back({b.center + hh * sign, up * sign, hl, hw, b.size.l * b.size.w});
  }
  return out;
}

double dot(const Point3& a, const Point3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

}  // namespace

void SceneSpec::validate() const {
  if (n_objects < 0) throw ConfigError("object count must be nonnegative");
  if (!(range_min > 0 && range_min < range_max)) throw ConfigError("invalid object range");
  if (!(half_fov > 0 && half_fov <= 3.14159)) throw ConfigError("invalid field of view");
  if (points_per_object < 0) throw ConfigError("points per object must be nonnegative");
  if (ground_density < 0 || clutter_rate < 0) throw ConfigError("densities must be nonnegative");
  if (!(sensor_noise >= 0)) throw ConfigError("sensor noise must be nonnegative");
  if (max_retries < 1) throw ConfigError("retry budget must be positive");
}

Scene generate_scene(const SceneSpec& spec, Rng& rng, std::vector<PointCloud>* object_points) {
  spec.validate();
  const SizeAnchor anchor = SizeAnchor::for_class(spec.object_class);
  Scene scene;

  std::vector<Box3D> placed;
  for (int i = 0; i < spec.n_objects; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < spec.max_retries && !ok; ++attempt) {
      const BoxSize size{anchor.size.h * rng.uniform(0.85, 1.15),
                         anchor.size.w * rng.uniform(0.85, 1.15),
                         anchor.size.l * rng.uniform(0.85, 1.15)};
      const double range = rng.uniform(spec.range_min, spec.range_max);
      const double azimuth = rng.uniform(-spec.half_fov, spec.half_fov);
      const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const Box3D box = make_box({range * std::cos(azimuth), range * std::sin(azimuth),
                                  spec.ground_z + 0.5 * size.h},
                                 size, yaw);
      ok = std::none_of(placed.begin(), placed.end(), [&](const Box3D& other) {
        return iou_bev(dilated(box, kPlacementGap), other) > 0.0;
      });
      if (ok) placed.push_back(box);
    }
    if (!ok) {
      throw ConfigError("could not place object " + std::to_string(i) + " without overlap after " +
                        std::to_string(spec.max_retries) + " attempts");
    }
  }

  if (object_points) object_points->clear();
  for (const Box3D& box : placed) {
    std::vector<Face> visible;
    double area = 0.0;
    for (const Face& f : faces_of(box)) {
      if (dot(f.normal, Point3{} - f.center) > 0.0) {
        visible.push_back(f);
        area += f.area;
      }
    }
    const double dist = std::hypot(box.center.x, box.center.y);
    const int count = static_cast<int>(std::lround(spec.points_per_object * std::pow(10.0 / dist, 2)));
    PointCloud pts;
    for (int k = 0; k < count; ++k) {
      double pick = rng.uniform(0.0, area);
      std::size_t f = 0;
      while (f + 1 < visible.size() && pick > visible[f].area) pick -= visible[f++].area;
      const Face& face = visible[f];
      const Point3 p = face.center + face.u * rng.uniform(-1.0, 1.0) + face.v * rng.uniform(-1.0, 1.0);
      pts.push_back(p + Point3{rng.normal(0.0, spec.sensor_noise), rng.normal(0.0, spec.sensor_noise),
                               rng.normal(0.0, spec.sensor_noise)});
    }
    scene.cloud.insert(scene.cloud.end(), pts.begin(), pts.end());
    if (object_points) object_points->push_back(std::move(pts));
    scene.ground_truths.push_back({box, spec.object_class, 0, 0.0, std::nullopt});
  }

  const double reach = spec.range_max + 5.0;
  const double area = 2.0 * reach * reach;
  auto inside_any = [&](const Point3& p, double margin) {
    return std::any_of(placed.begin(), placed.end(),
                       [&](const Box3D& b) { return dilated(b, margin).contains(p); });
  };
  const auto n_ground = static_cast<long>(std::lround(spec.ground_density * area));
  for (long k = 0; k < n_ground; ++k) {
    const Point3 p{rng.uniform(0.0, reach), rng.uniform(-reach, reach),
                   spec.ground_z + rng.normal(0.0, spec.sensor_noise)};
    // Ground under an object is hidden by it.
    const Point3 probe{p.x, p.y, spec.ground_z + 0.1};
    if (!inside_any(probe, 0.0)) scene.cloud.push_back(p);
  }
  const auto n_clutter = static_cast<long>(std::lround(spec.clutter_rate * area));
  for (long k = 0; k < n_clutter; ++k) {
    const Point3 p{rng.uniform(0.0, reach), rng.uniform(-reach, reach),
                   rng.uniform(spec.ground_z, spec.ground_z + 3.0)};
    if (!inside_any(p, 0.3)) scene.cloud.push_back(p);
  }
  return scene;
}

Calibration synthetic_calibration() {
  Calibration c = Calibration::axis_aligned();
  c.velo_to_cam(1, 3) = -0.08;
  c.velo_to_cam(2, 3) = -0.27;
  Eigen::Matrix<double, 3, 4> p2;
  p2 << 721.5377, 0.0, 609.5593, 44.85728,  //
      0.0, 721.5377, 172.854, 0.2163791,     //
      0.0, 0.0, 1.0, 0.002745884;
  c.p2 = p2;
  return c;
}

double image_box_height(const Box3D& box, const Calibration& calib) {
  if (!calib.p2) return 0.0;
  double lo = 1e300, hi = -1e300;
  for (const Point3& corner : box_corners(box)) {
    const Point3 cam = calib.lidar_to_camera(corner);
    const Eigen::Vector3d uvw = *calib.p2 * Eigen::Vector4d(cam.x, cam.y, cam.z, 1.0);
    if (uvw(2) <= 1e-6) return 0.0;
    lo = std::min(lo, uvw(1) / uvw(2));
    hi = std::max(hi, uvw(1) / uvw(2));
  }
  return hi - lo;
}

void LocalizerSpec::validate() const {
  if (!(noise_scale >= 0)) throw ConfigError("noise scale must be nonnegative");
  if (!(false_negative_rate >= 0 && false_negative_rate <= 1)) {
    throw ConfigError("false-negative rate must lie in [0, 1]");
  }
  if (!(false_positives >= 0)) throw ConfigError("false-positive count must be nonnegative");
  if (!(score_jitter >= 0)) throw ConfigError("score jitter must be nonnegative");
}

std::vector<Detection> simulate_localizer(const Scene& scene, ObjectClass object_class,
                                          const LocalizerSpec& spec, Rng& rng) {
  spec.validate();
  auto jitter = [&](double s) {
    if (spec.score_jitter > 0) s += rng.normal(0.0, spec.score_jitter);
    return std::clamp(s, 0.0, 1.0);
  };
  std::vector<Detection> out;
  std::vector<Box3D> boxes;
  for (const auto& g : scene.ground_truths) {
    if (g.object_class != object_class) continue;
    boxes.push_back(g.box);
    if (rng.bernoulli(spec.false_negative_rate)) continue;
    Point3 n;
    if (spec.noise == NoiseKind::kUniform) {
      n = {rng.uniform(-spec.noise_scale, spec.noise_scale), rng.uniform(-spec.noise_scale, spec.noise_scale),
           rng.uniform(-spec.noise_scale, spec.noise_scale)};
    } else {
      n = {rng.normal(0.0, spec.noise_scale), rng.normal(0.0, spec.noise_scale),
           rng.normal(0.0, spec.noise_scale)};
    }
    const double base = spec.noise_scale > 0 ? 1.0 - n.norm() / (2.0 * spec.noise_scale) : 1.0;
    Detection d;
    d.location = g.box.center + n;
    d.score = jitter(std::clamp(base, 0.0, 1.0));
    out.push_back(d);
  }

  const double whole = std::floor(spec.false_positives);
  const int n_fp = static_cast<int>(whole) + (rng.bernoulli(spec.false_positives - whole) ? 1 : 0);
  const SizeAnchor anchor = SizeAnchor::for_class(object_class);
  for (int k = 0; k < n_fp; ++k) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const Point3 p{rng.uniform(5.0, 40.0), rng.uniform(-20.0, 20.0), -1.73 + 0.5 * anchor.size.h};
      const Box3D candidate = make_box(p, anchor.size, 0.0);
      if (std::any_of(boxes.begin(), boxes.end(),
                      [&](const Box3D& b) { return iou_bev(dilated(candidate, 0.5), b) > 0.0; })) {
        continue;
      }
      Detection d;
      d.location = p;
      d.score = jitter(rng.uniform(0.0, 0.5));
      out.push_back(d);
      break;
    }
  }
  return out;
}

}  // namespace epbrm
