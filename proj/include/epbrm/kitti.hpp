#pragma once

// KITTI-format readers and writers: velodyne scans, calibration, labels and
// detection results, plus the dataset directory layout.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "epbrm/dataset.hpp"

namespace epbrm {

struct Calibration {
  Eigen::Matrix3d r0_rect = Eigen::Matrix3d::Identity();
  Eigen::Matrix<double, 3, 4> velo_to_cam = Eigen::Matrix<double, 3, 4>::Zero();
  std::optional<Eigen::Matrix<double, 3, 4>> p2;  // left color camera projection

  /// Devkit axis mapping (camera x right, y down, z forward from lidar x
  /// forward, y left, z up), identity rectification, no projection.
  static Calibration axis_aligned();
  /// Throws FormatError when a rotation is not orthonormal within 1e-3.
  void validate() const;

  Point3 lidar_to_camera(const Point3& p) const;  // rectified camera frame
  Point3 camera_to_lidar(const Point3& p) const;
  Point3 lidar_dir_to_camera(const Point3& v) const;
  Point3 camera_dir_to_lidar(const Point3& v) const;
};

Calibration parse_calibration(const std::string& text);
Calibration read_calibration(const std::filesystem::path& path);
void write_calibration(const std::filesystem::path& path, const Calibration& calib);

PointCloud read_velodyne(const std::filesystem::path& path);
/// Writes reflectance 0 for every point.
void write_velodyne(const std::filesystem::path& path, const PointCloud& cloud);

/// One parsed KITTI label or result line, still in camera coordinates.
struct KittiObject {
  std::string type;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  double bbox[4] = {0, 0, 0, 0};
  double h = 0, w = 0, l = 0;
  Point3 location;  // bottom center, rectified camera frame
  double rotation_y = 0.0;
  std::optional<double> score;
};

/// Parses one line with 15 fields, or 16 when `with_score`. Throws
/// FormatError naming `line_number`.
KittiObject parse_kitti_line(const std::string& line, bool with_score, int line_number);
std::string format_kitti_line(const KittiObject& o);

Box3D kitti_to_box(const KittiObject& o, const Calibration& calib);
KittiObject box_to_kitti(const Box3D& box, const Calibration& calib, ObjectClass c);

/// Ground truths of the three supported classes; DontCare and other types
/// are skipped.
std::vector<GroundTruth> parse_labels(const std::string& text, const Calibration& calib);
std::vector<GroundTruth> read_labels(const std::filesystem::path& path, const Calibration& calib);
void write_labels(const std::filesystem::path& path, const std::vector<GroundTruth>& gts,
                  const Calibration& calib);

/// Detections of one class from a result file (16 fields per line).
/// `location` is the box center; `box` is set.
std::vector<Detection> parse_predictions(const std::string& text, const Calibration& calib,
                                         std::optional<ObjectClass> only = std::nullopt);
std::vector<Detection> read_predictions(const std::filesystem::path& path, const Calibration& calib,
                                        std::optional<ObjectClass> only = std::nullopt);
/// Detections without a box are written as a `fallback_size` box at their
/// location with yaw 0.
void write_predictions(const std::filesystem::path& path, const std::vector<Detection>& dets,
                       const Calibration& calib, ObjectClass c, const BoxSize& fallback_size);

/// Split directory with velodyne/, calib/ and label_2/ (or label/).
struct DatasetLayout {
  std::filesystem::path root;

  std::filesystem::path velodyne(const std::string& id) const;
  std::filesystem::path calib(const std::string& id) const;
  /// label_2/ when it exists, else label/.
  std::filesystem::path label(const std::string& id) const;

  /// Frame ids: the lines of `split_file` when given, else every velodyne
  /// file stem, sorted.
  std::vector<std::string> ids(const std::optional<std::filesystem::path>& split_file = {}) const;
};

/// Reads one frame; labels are optional when `require_labels` is false.
Scene read_scene(const DatasetLayout& layout, const std::string& id, bool require_labels = true);
void write_scene(const DatasetLayout& layout, const Scene& scene, const Calibration& calib);

}  // namespace epbrm
