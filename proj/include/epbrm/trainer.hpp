#pragma once

// Mini-batch training of an epBRM model on augmented samples.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "epbrm/augment.hpp"
#include "epbrm/checkpoint.hpp"
#include "epbrm/loss.hpp"
#include "epbrm/model.hpp"
#include "epbrm/optimizer.hpp"

namespace epbrm {

/// One ground-truth box with its cached sampling-region crop.
struct TrainObject {
  PointCloud crop;
  Box3D gt;
};

struct TrainerConfig {
  ModelConfig model;
  std::int64_t iterations = 1000;
  int batch = 64;
  double learning_rate = 5e-4;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::uint64_t seed = 0;
  int threads = 1;
  std::int64_t checkpoint_every = 0;  // 0: only at the end
  std::filesystem::path checkpoint_path;  // empty: no files written
  LossWeights weights;
  double scale_min = 0.9;
  double scale_max = 1.1;
  /// When positive, this many samples are generated once and iterations
  /// cycle through them in order instead of drawing fresh augmentations.
  int fixed_samples = 0;

  AugmentConfig augment() const;
  void validate() const;
};

struct IterationLog {
  std::int64_t iteration = 0;
  LossBreakdown loss;  // mean over the samples used
  int samples = 0;     // samples that produced a gradient
};

/// Boxes whose crop holds at least `min_points` points.
std::vector<TrainObject> make_train_objects(const PointCloud& scene, const std::vector<Box3D>& boxes,
                                            const AugmentConfig& cfg, std::size_t min_points = 1);

/// Runs iterations (resume->iteration, cfg.iterations]. Every batch is drawn
/// from a stream keyed by (seed, iteration), per-sample gradients are summed
/// in batch order, so results are independent of the thread count and a
/// resumed run continues exactly as an uninterrupted one would.
Checkpoint train(const std::vector<TrainObject>& objects, const TrainerConfig& cfg,
                 std::optional<Checkpoint> resume = std::nullopt,
                 const std::function<void(const IterationLog&)>& on_iteration = {});

/// Loss-log columns: iteration, total, loc, rot_cls, rot_reg, size, and
/// loc_center when the model has a centering stage.
void write_loss_header(std::ostream& out, bool has_loc_center);
void write_loss_line(std::ostream& out, const IterationLog& log, bool has_loc_center);

}  // namespace epbrm
