#pragma once

// The endpoint box regression model: a sequence of transformation stages
// followed by a box-regression head, each stage and the head being one
// PointNet block.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "epbrm/block.hpp"
#include "epbrm/boxcodec.hpp"
#include "epbrm/geometry.hpp"
#include "epbrm/mechanism.hpp"
#include "epbrm/object_class.hpp"
#include "epbrm/sampling.hpp"

namespace epbrm {

struct ModelConfig {
  ObjectClass object_class = ObjectClass::kCar;
  double dist_bound = 0.15;
  int rotation_bins = 12;
  int n_points = 256;
  std::vector<Mechanism> mechanisms;
  std::vector<int> point_widths{64, 128, 256};
  std::vector<int> head_widths{128};

  TransformBounds transform_bounds() const {
    return TransformBounds::for_dist_bound(dist_bound);
  }
  RegressionBounds regression_bounds() const {
    return RegressionBounds::from(transform_bounds());
  }
  SizeAnchor anchor() const { return SizeAnchor::for_class(object_class); }
  SamplingRegion region() const { return SamplingRegion::for_class(object_class); }
  RotationBins bins() const { return {rotation_bins}; }
  bool has_centering() const;

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename T>
struct Stage {
  Mechanism kind = Mechanism::kTranslation;
  BlockParams<T> block;
};

template <typename T>
struct EpbrmModel {
  ModelConfig config;
  std::vector<Stage<T>> stages;
  BlockParams<T> head;

  /// Fresh model with Glorot-uniform weights drawn from `seed`.
  static EpbrmModel init(const ModelConfig& config, std::uint64_t seed);

  EpbrmModel zeros_like() const;
  std::size_t parameter_count() const;

  /// Stage blocks in order, then the head.
  void for_each_tensor(const std::function<void(Eigen::Map<Matrix<T>>)>& fn);
  void for_each_tensor(
      const std::function<void(Eigen::Map<const Matrix<T>>)>& fn) const;

  /// this += other, tensor by tensor.
  void add(const EpbrmModel& other);

  template <typename U>
  EpbrmModel<U> cast() const {
    EpbrmModel<U> out;
    out.config = config;
    for (const auto& s : stages) out.stages.push_back({s.kind, s.block.template cast<U>()});
    out.head = head.template cast<U>();
    return out;
  }
};

/// Output of one forward pass.
struct BoxPrediction {
  Point3 location;  // decoded offset in the final stage frame
  double yaw = 0.0; // final stage frame, [0, pi)
  BoxSize size;     // final stage frame
  std::vector<double> head_raw;
  std::vector<std::vector<double>> stage_raw;
  std::vector<StageTransform> transforms;
  Box3D box;  // mapped back to the input frame
};

/// Gradient of a scalar objective with respect to the raw block outputs.
struct PredictionGrad {
  std::vector<double> head_raw;
  std::vector<std::vector<double>> stage_raw;

  static PredictionGrad zeros_for(const BoxPrediction& p);
};

/// Column indices of each stage's transformed cloud that feed the next block.
using StageSelections = std::vector<std::vector<std::size_t>>;

template <typename T>
struct EpbrmCache {
  std::vector<Matrix<T>> stage_inputs;
  std::vector<Matrix<T>> stage_outputs;  // transformed clouds before selection
  std::vector<BlockCache<T>> stage_blocks;
  StageSelections selections;
  Matrix<T> head_input;
  BlockCache<T> head_block;
};

struct ForwardOptions {
  /// Root of the per-stage resampling streams.
  std::uint64_t seed = 0;
  /// When set, crop membership and resampling reuse these selections.
  const StageSelections* replay = nullptr;
};

template <typename T>
Matrix<T> to_matrix(const PointCloud& cloud);
template <typename T>
PointCloud to_cloud(const Matrix<T>& m);

/// Runs all stages and the head on a 3 x n_points cloud in the proposal frame.
/// Throws StageCropError when a stage leaves no point inside the region.
template <typename T>
BoxPrediction epbrm_forward(const Matrix<T>& cloud, const EpbrmModel<T>& model,
                            const ForwardOptions& options, EpbrmCache<T>& cache);

/// Convenience overload: resamples `cloud` to config.n_points first.
template <typename T>
BoxPrediction epbrm_forward(const PointCloud& cloud, const EpbrmModel<T>& model,
                            const ForwardOptions& options, EpbrmCache<T>& cache);

/// Parameter gradients for upstream gradient `d_pred`. Crop membership and
/// resampling are held fixed. When `d_cloud` is given it receives the
/// gradient with respect to the input cloud.
template <typename T>
EpbrmModel<T> epbrm_backward(const EpbrmModel<T>& model, const BoxPrediction& pred,
                             const EpbrmCache<T>& cache, const PredictionGrad& d_pred,
                             Matrix<T>* d_cloud = nullptr);

}  // namespace epbrm
