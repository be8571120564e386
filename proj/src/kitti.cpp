#include "epbrm/kitti.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <Eigen/LU>

#include "epbrm/errors.hpp"

namespace epbrm {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double to_double(const std::string& tok, const std::string& what) {
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw FormatError("invalid number '" + tok + "' in " + what);
  }
  return v;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error while reading " + path.string());
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("error while writing " + path.string());
}

Point3 from_vec(const Eigen::Vector3d& v) { return {v(0), v(1), v(2)}; }
Eigen::Vector3d to_vec(const Point3& p) { return {p.x, p.y, p.z}; }

bool orthonormal(const Eigen::Matrix3d& r) {
  return (r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-3;
}

std::string format_fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  // Avoid "-0.000000" so equal values format identically.
  if (std::string(buf) == "-0.000000") return "0.000000";
  return buf;
}

}  // namespace

std::vector<Box3D> Scene::boxes_of(ObjectClass c) const {
  std::vector<Box3D> out;
  for (const auto& g : ground_truths) {
    if (g.object_class == c) out.push_back(g.box);
  }
  return out;
}

Calibration Calibration::axis_aligned() {
  Calibration c;
  c.velo_to_cam << 0, -1, 0, 0,  //
      0, 0, -1, 0,               //
      1, 0, 0, 0;
  return c;
}

void Calibration::validate() const {
  if (!orthonormal(r0_rect)) throw FormatError("R0_rect is not a rotation");
  if (!orthonormal(velo_to_cam.leftCols<3>())) {
    throw FormatError("Tr_velo_to_cam rotation is not orthonormal");
  }
}

Point3 Calibration::lidar_to_camera(const Point3& p) const {
  return from_vec(r0_rect * (velo_to_cam.leftCols<3>() * to_vec(p) + velo_to_cam.col(3)));
}

Point3 Calibration::camera_to_lidar(const Point3& p) const {
  const Eigen::Vector3d ref = r0_rect.inverse() * to_vec(p);
  return from_vec(velo_to_cam.leftCols<3>().inverse() * (ref - velo_to_cam.col(3)));
}

Point3 Calibration::lidar_dir_to_camera(const Point3& v) const {
  return from_vec(r0_rect * velo_to_cam.leftCols<3>() * to_vec(v));
}

Point3 Calibration::camera_dir_to_lidar(const Point3& v) const {
  return from_vec(velo_to_cam.leftCols<3>().inverse() * (r0_rect.inverse() * to_vec(v)));
}

Calibration parse_calibration(const std::string& text) {
  std::map<std::string, std::vector<double>> entries;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      if (split_ws(line).empty()) continue;
      throw FormatError("calibration line " + std::to_string(number) + " has no key");
    }
    std::string key = line.substr(0, colon);
    key.erase(std::remove_if(key.begin(), key.end(), [](unsigned char ch) { return std::isspace(ch); }),
              key.end());
    std::vector<double> values;
    for (const auto& tok : split_ws(line.substr(colon + 1))) {
      values.push_back(to_double(tok, "calibration line " + std::to_string(number)));
    }
    entries[key] = std::move(values);
  }

  auto find = [&](std::initializer_list<const char*> keys, std::size_t count) -> const std::vector<double>* {
    for (const char* k : keys) {
      auto it = entries.find(k);
      if (it == entries.end()) continue;
      if (it->second.size() != count) {
        throw FormatError(std::string("calibration entry ") + k + " needs " +
                          std::to_string(count) + " values");
      }
      return &it->second;
    }
    return nullptr;
  };

  Calibration c;
  if (const auto* r = find({"R0_rect", "R_rect"}, 9)) {
    for (int i = 0; i < 9; ++i) c.r0_rect(i / 3, i % 3) = (*r)[static_cast<std::size_t>(i)];
  }
  const auto* tr = find({"Tr_velo_to_cam", "Tr_velo_cam"}, 12);
  if (!tr) throw FormatError("calibration has no Tr_velo_to_cam entry");
  for (int i = 0; i < 12; ++i) c.velo_to_cam(i / 4, i % 4) = (*tr)[static_cast<std::size_t>(i)];
  if (const auto* p2 = find({"P2"}, 12)) {
    Eigen::Matrix<double, 3, 4> m;
    for (int i = 0; i < 12; ++i) m(i / 4, i % 4) = (*p2)[static_cast<std::size_t>(i)];
    c.p2 = m;
  }
  c.validate();
  return c;
}

Calibration read_calibration(const fs::path& path) {
  try {
    return parse_calibration(read_text(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_calibration(const fs::path& path, const Calibration& calib) {
  std::ostringstream out;
  auto row = [&](const char* key, const auto& m) {
    out << key << ':';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index col = 0; col < m.cols(); ++col) {
        char buf[40];
        std::snprintf(buf, sizeof buf, " %.12e", m(r, col));
        out << buf;
      }
    }
    out << '\n';
  };
  if (calib.p2) row("P2", *calib.p2);
  row("R0_rect", calib.r0_rect);
  row("Tr_velo_to_cam", calib.velo_to_cam);
  write_text(path, out.str());
}

PointCloud read_velodyne(const fs::path& path) {
  const std::string bytes = read_text(path);
  if (bytes.size() % 16 != 0) {
    throw FormatError(path.string() + ": size " + std::to_string(bytes.size()) +
                      " is not a multiple of 16 bytes");
  }
  auto f32 = [&bytes](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    return static_cast<double>(std::bit_cast<float>(v));
  };
  PointCloud cloud;
  cloud.reserve(bytes.size() / 16);
  for (std::size_t at = 0; at < bytes.size(); at += 16) {
    const Point3 p{f32(at), f32(at + 4), f32(at + 8)};
    if (!p.finite()) throw FormatError(path.string() + ": non-finite point at byte " + std::to_string(at));
    cloud.push_back(p);
  }
  return cloud;
}

void write_velodyne(const fs::path& path, const PointCloud& cloud) {
  std::string bytes;
  bytes.reserve(cloud.size() * 16);
  auto put = [&bytes](float f) {
    const auto v = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  };
  for (const Point3& p : cloud) {
    put(static_cast<float>(p.x));
    put(static_cast<float>(p.y));
    put(static_cast<float>(p.z));
    put(0.0f);
  }
  write_text(path, bytes);
}

KittiObject parse_kitti_line(const std::string& line, bool with_score, int line_number) {
  const auto tok = split_ws(line);
  const std::size_t expected = with_score ? 16 : 15;
  const std::string where = "line " + std::to_string(line_number);
  if (tok.size() != expected) {
    throw FormatError(where + ": expected " + std::to_string(expected) + " fields, found " +
                      std::to_string(tok.size()));
  }
  KittiObject o;
  o.type = tok[0];
  o.truncation = to_double(tok[1], where);
  const double occ = to_double(tok[2], where);
  if (occ != std::floor(occ)) throw FormatError(where + ": occlusion must be an integer");
  o.occlusion = static_cast<int>(occ);
  o.alpha = to_double(tok[3], where);
  for (int i = 0; i < 4; ++i) o.bbox[i] = to_double(tok[4 + static_cast<std::size_t>(i)], where);
  o.h = to_double(tok[8], where);
  o.w = to_double(tok[9], where);
  o.l = to_double(tok[10], where);
  o.location = {to_double(tok[11], where), to_double(tok[12], where), to_double(tok[13], where)};
  o.rotation_y = to_double(tok[14], where);
  if (with_score) o.score = to_double(tok[15], where);
  return o;
}

std::string format_kitti_line(const KittiObject& o) {
  std::string s = o.type;
  auto put = [&s](double v) { s += ' ' + format_fixed(v); };
  put(o.truncation);
  s += ' ' + std::to_string(o.occlusion);
  put(o.alpha);
  for (double b : o.bbox) put(b);
  put(o.h);
  put(o.w);
  put(o.l);
  put(o.location.x);
  put(o.location.y);
  put(o.location.z);
  put(o.rotation_y);
  if (o.score) put(*o.score);
  return s;
}

Box3D kitti_to_box(const KittiObject& o, const Calibration& calib) {
  Point3 center = calib.camera_to_lidar(o.location);
  center.z += 0.5 * o.h;
  const Point3 heading =
      calib.camera_dir_to_lidar({std::cos(o.rotation_y), 0.0, -std::sin(o.rotation_y)});
  return make_box(center, {o.h, o.w, o.l}, std::atan2(heading.x, heading.y));
}

KittiObject box_to_kitti(const Box3D& box, const Calibration& calib, ObjectClass c) {
  KittiObject o;
  o.type = std::string(class_name(c));
  o.h = box.size.h;
  o.w = box.size.w;
  o.l = box.size.l;
  o.location = calib.lidar_to_camera({box.center.x, box.center.y, box.center.z - 0.5 * box.size.h});
  const Point3 heading = calib.lidar_dir_to_camera({std::sin(box.yaw), std::cos(box.yaw), 0.0});
  o.rotation_y = std::atan2(-heading.z, heading.x);
  o.alpha = wrap_angle(o.rotation_y - std::atan2(o.location.x, o.location.z));
  if (calib.p2) {
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    bool in_front = true;
    for (const Point3& corner : box_corners(box)) {
      const Point3 cam = calib.lidar_to_camera(corner);
      const Eigen::Vector3d uvw = *calib.p2 * Eigen::Vector4d(cam.x, cam.y, cam.z, 1.0);
      if (uvw(2) <= 1e-6) {
        in_front = false;
        break;
      }
      x0 = std::min(x0, uvw(0) / uvw(2));
      x1 = std::max(x1, uvw(0) / uvw(2));
      y0 = std::min(y0, uvw(1) / uvw(2));
      y1 = std::max(y1, uvw(1) / uvw(2));
    }
    if (in_front) {
      o.bbox[0] = x0;
      o.bbox[1] = y0;
      o.bbox[2] = x1;
      o.bbox[3] = y1;
    }
  }
  return o;
}

std::vector<GroundTruth> parse_labels(const std::string& text, const Calibration& calib) {
  std::vector<GroundTruth> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (split_ws(line).empty()) continue;
    const KittiObject o = parse_kitti_line(line, false, number);
    const auto cls = parse_class(o.type);
    if (!cls) continue;
    if (!(o.h > 0 && o.w > 0 && o.l > 0)) {
      throw FormatError("line " + std::to_string(number) + ": box dimensions must be positive");
    }
    GroundTruth g;
    g.box = kitti_to_box(o, calib);
    g.object_class = *cls;
    g.occlusion = o.occlusion;
    g.truncation = o.truncation;
    const double height = o.bbox[3] - o.bbox[1];
    if (height > 0) g.height_px = height;
    out.push_back(g);
  }
  return out;
}

std::vector<GroundTruth> read_labels(const fs::path& path, const Calibration& calib) {
  try {
    return parse_labels(read_text(path), calib);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_labels(const fs::path& path, const std::vector<GroundTruth>& gts, const Calibration& calib) {
  std::string text;
  for (const auto& g : gts) {
    KittiObject o = box_to_kitti(g.box, calib, g.object_class);
    o.truncation = g.truncation;
    o.occlusion = g.occlusion;
    text += format_kitti_line(o) + '\n';
  }
  write_text(path, text);
}

std::vector<Detection> parse_predictions(const std::string& text, const Calibration& calib,
                                         std::optional<ObjectClass> only) {
  std::vector<Detection> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (split_ws(line).empty()) continue;
    const KittiObject o = parse_kitti_line(line, true, number);
    const auto cls = parse_class(o.type);
    if (!cls || (only && *cls != *only)) continue;
    if (!(o.h > 0 && o.w > 0 && o.l > 0)) {
      throw FormatError("line " + std::to_string(number) + ": box dimensions must be positive");
    }
    Detection d;
    d.box = kitti_to_box(o, calib);
    d.location = d.box->center;
    d.score = *o.score;
    out.push_back(d);
  }
  return out;
}

std::vector<Detection> read_predictions(const fs::path& path, const Calibration& calib,
                                        std::optional<ObjectClass> only) {
  try {
    return parse_predictions(read_text(path), calib, only);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_predictions(const fs::path& path, const std::vector<Detection>& dets,
                       const Calibration& calib, ObjectClass c, const BoxSize& fallback_size) {
  std::string text;
  for (const auto& d : dets) {
    const Box3D box = d.box ? *d.box : make_box(d.location, fallback_size, 0.0);
    KittiObject o = box_to_kitti(box, calib, c);
    o.truncation = -1;
    o.occlusion = -1;
    o.score = d.score;
    text += format_kitti_line(o) + '\n';
  }
  write_text(path, text);
}

fs::path DatasetLayout::velodyne(const std::string& id) const { return root / "velodyne" / (id + ".bin"); }
fs::path DatasetLayout::calib(const std::string& id) const { return root / "calib" / (id + ".txt"); }
fs::path DatasetLayout::label(const std::string& id) const {
  const fs::path kitti = root / "label_2";
  return (fs::is_directory(kitti) ? kitti : root / "label") / (id + ".txt");
}

std::vector<std::string> DatasetLayout::ids(const std::optional<fs::path>& split_file) const {
  std::vector<std::string> out;
  if (split_file) {
    for (const auto& tok : split_ws(read_text(*split_file))) out.push_back(tok);
    return out;
  }
  const fs::path dir = root / "velodyne";
  if (!fs::is_directory(dir)) throw IoError("no velodyne directory under " + root.string());
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".bin") out.push_back(entry.path().stem().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Scene read_scene(const DatasetLayout& layout, const std::string& id, bool require_labels) {
  Scene s;
  s.id = id;
  s.cloud = read_velodyne(layout.velodyne(id));
  const Calibration calib = read_calibration(layout.calib(id));
  const fs::path label = layout.label(id);
  if (require_labels || fs::exists(label)) s.ground_truths = read_labels(label, calib);
  return s;
}

void write_scene(const DatasetLayout& layout, const Scene& scene, const Calibration& calib) {
  for (const char* sub : {"velodyne", "calib", "label"}) fs::create_directories(layout.root / sub);
  write_velodyne(layout.velodyne(scene.id), scene.cloud);
  write_calibration(layout.calib(scene.id), calib);
  write_labels(layout.root / "label" / (scene.id + ".txt"), scene.ground_truths, calib);
}

}  // namespace epbrm
