#pragma once

// Detection metrics: IoU-thresholded greedy matching, detected-GT ratio,
// interpolated average precision, max recall and KITTI difficulty strata.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "epbrm/dataset.hpp"
#include "epbrm/geometry.hpp"

namespace epbrm {

struct PredictionMatch {
  double score = 0.0;
  std::optional<std::size_t> gt;  // matched ground truth
  double iou = 0.0;               // IoU with the matched ground truth
  bool ignored = false;           // overlaps only ignored ground truths
};

struct MatchResult {
  std::vector<PredictionMatch> predictions;  // input order
  std::vector<bool> detected;                // per ground truth
  std::vector<bool> ignored;                 // per ground truth

  std::size_t counted_gt() const;    // ground truths not ignored
  std::size_t detected_count() const;  // detected and not ignored
};

/// Greedy matching in descending score order (ties by input order): each
/// prediction takes the highest-IoU unmatched counted ground truth with
/// IoU >= threshold; failing that, a prediction overlapping an ignored ground
/// truth at the threshold is itself ignored. Predictions without a box never
/// match. `ignore` may be empty.
MatchResult match(const std::vector<Box3D>& gts, const std::vector<Detection>& preds,
                  double iou_threshold, const std::vector<bool>& ignore = {});

/// Detected ground truths over all ground truths, pooled over scenes; 0 when
/// there are none.
double ratio(const std::vector<MatchResult>& scenes);

/// Precision/recall points from scenes pooled into one score ranking.
struct PooledMatches {
  std::vector<std::pair<double, bool>> scored;  // (score, true positive), ignored dropped
  std::size_t n_gt = 0;
  std::size_t detected = 0;

  static PooledMatches from(const std::vector<MatchResult>& scenes);
};

/// Interpolated AP over recall positions {1/K, ..., 1} for K = 40, or
/// {0, 0.1, ..., 1} for K = 11, with one curve point per distinct score.
/// Throws ConfigError when n_gt == 0 or K is neither.
double average_precision(const PooledMatches& pooled, int points = 40);

/// Detected / n_gt with every prediction considered. Throws when n_gt == 0.
double max_recall(const PooledMatches& pooled);
/// max_recall rounded down to a multiple of 1/40.
double quantized_recall(double recall);

enum class Difficulty { kEasy, kModerate, kHard, kAll };

struct DifficultyThresholds {
  double min_height_px;
  int max_occlusion;
  double max_truncation;

  static DifficultyThresholds for_level(Difficulty level);
};

Difficulty parse_difficulty(const std::string& name);
std::string difficulty_name(Difficulty level);

/// Ignore mask for ground truths outside `level`. Throws ConfigError when a
/// level other than all is requested and a ground truth has no image height.
std::vector<bool> filter_difficulty(const std::vector<GroundTruth>& gts, Difficulty level);

struct EvalRow {
  std::string metric;
  std::string object_class;
  std::string level;
  double threshold = 0.0;
  double value = 0.0;
};

struct EvalOptions {
  ObjectClass object_class = ObjectClass::kCar;
  Difficulty level = Difficulty::kModerate;
  std::optional<double> iou_threshold;  // default: per-class threshold
  int ap_points = 40;
};

/// Scenes pair up by index. The ratio row ignores difficulty; AP and recall
/// rows use `level`. AP and recall are 0 when the level holds no ground truth.
std::vector<EvalRow> evaluate(const std::vector<std::vector<GroundTruth>>& gts,
                              const std::vector<std::vector<Detection>>& preds,
                              const EvalOptions& options);

/// One row per line: metric class level threshold value.
void write_report_text(std::ostream& out, const std::vector<EvalRow>& rows);
/// JSON array of row objects.
void write_report_json(std::ostream& out, const std::vector<EvalRow>& rows);

}  // namespace epbrm
