#include "epbrm/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "epbrm/errors.hpp"
#include "json.hpp"

namespace epbrm {

std::size_t MatchResult::counted_gt() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < detected.size(); ++i) n += !ignored[i];
  return n;
}

std::size_t MatchResult::detected_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < detected.size(); ++i) n += detected[i] && !ignored[i];
  return n;
}

MatchResult match(const std::vector<Box3D>& gts, const std::vector<Detection>& preds,
                  double iou_threshold, const std::vector<bool>& ignore) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ConfigError("IoU threshold must lie in (0, 1]");
  }
  if (!ignore.empty() && ignore.size() != gts.size()) {
    throw ShapeError("ignore mask does not match the ground-truth list");
  }
  MatchResult r;
  r.detected.assign(gts.size(), false);
  r.ignored = ignore.empty() ? std::vector<bool>(gts.size(), false) : ignore;
  r.predictions.resize(preds.size());

  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });

  for (std::size_t p : order) {
    PredictionMatch& m = r.predictions[p];
    m.score = preds[p].score;
    if (!preds[p].box) continue;
    double best = -1.0;
    std::optional<std::size_t> best_gt;
    bool touches_ignored = false;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double iou = iou_3d(*preds[p].box, gts[g]);
      if (iou < iou_threshold) continue;
      if (r.ignored[g]) {
        touches_ignored = true;
        continue;
      }
      if (!r.detected[g] && iou > best) {
        best = iou;
        best_gt = g;
      }
    }
    if (best_gt) {
      r.detected[*best_gt] = true;
      m.gt = best_gt;
      m.iou = best;
    } else {
      m.ignored = touches_ignored;
    }
  }
  return r;
}

double ratio(const std::vector<MatchResult>& scenes) {
  std::size_t total = 0, found = 0;
  for (const auto& s : scenes) {
    total += s.detected.size();
    found += static_cast<std::size_t>(std::count(s.detected.begin(), s.detected.end(), true));
  }
  return total == 0 ? 0.0 : static_cast<double>(found) / static_cast<double>(total);
}

PooledMatches PooledMatches::from(const std::vector<MatchResult>& scenes) {
  PooledMatches out;
  for (const auto& s : scenes) {
    out.n_gt += s.counted_gt();
    out.detected += s.detected_count();
    for (const auto& p : s.predictions) {
      if (!p.ignored) out.scored.emplace_back(p.score, p.gt.has_value());
    }
  }
  std::stable_sort(out.scored.begin(), out.scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  return out;
}

double average_precision(const PooledMatches& pooled, int points) {
  if (pooled.n_gt == 0) throw ConfigError("average precision is undefined without ground truth");
  if (points != 40 && points != 11) throw ConfigError("AP interpolation must use 40 or 11 points");
  auto ranked = pooled.scored;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  // One curve point per distinct score threshold; recall compared in
  // integers: tp * K >= k * n_gt.
  std::vector<std::pair<std::size_t, double>> curve;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    tp += ranked[i].second;
    if (i + 1 < ranked.size() && ranked[i + 1].first == ranked[i].first) continue;
    curve.emplace_back(tp, static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  const auto n = static_cast<std::size_t>(pooled.n_gt);
  const std::size_t steps = points == 40 ? 40 : 10;
  const std::size_t first = points == 40 ? 1 : 0;
  double sum = 0.0;
  for (std::size_t k = first; k <= steps; ++k) {
    double best = 0.0;
    for (const auto& [hits, precision] : curve) {
      if (hits * steps >= k * n) best = std::max(best, precision);
    }
    sum += best;
  }
  return sum / static_cast<double>(points);
}

double max_recall(const PooledMatches& pooled) {
  if (pooled.n_gt == 0) throw ConfigError("recall is undefined without ground truth");
  return static_cast<double>(pooled.detected) / static_cast<double>(pooled.n_gt);
}

double quantized_recall(double recall) { return std::floor(recall * 40.0 + 1e-9) / 40.0; }

DifficultyThresholds DifficultyThresholds::for_level(Difficulty level) {
  switch (level) {
    case Difficulty::kEasy: return {40.0, 0, 0.15};
    case Difficulty::kModerate: return {25.0, 1, 0.30};
    case Difficulty::kHard: return {25.0, 2, 0.50};
    case Difficulty::kAll: break;
  }
  return {0.0, 1 << 30, 1e300};
}

Difficulty parse_difficulty(const std::string& name) {
  if (name == "easy") return Difficulty::kEasy;
  if (name == "moderate") return Difficulty::kModerate;
  if (name == "hard") return Difficulty::kHard;
  if (name == "all") return Difficulty::kAll;
  throw ConfigError("unknown difficulty '" + name + "' (expected easy, moderate, hard or all)");
}

std::string difficulty_name(Difficulty level) {
  switch (level) {
    case Difficulty::kEasy: return "easy";
    case Difficulty::kModerate: return "moderate";
    case Difficulty::kHard: return "hard";
    case Difficulty::kAll: break;
  }
  return "all";
}

std::vector<bool> filter_difficulty(const std::vector<GroundTruth>& gts, Difficulty level) {
  std::vector<bool> ignore(gts.size(), false);
  if (level == Difficulty::kAll) return ignore;
  const auto t = DifficultyThresholds::for_level(level);
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const auto& g = gts[i];
    if (!g.height_px) {
      throw ConfigError("ground truth has no image-box height; use level=all");
    }
    ignore[i] = *g.height_px < t.min_height_px || g.occlusion > t.max_occlusion ||
                g.truncation > t.max_truncation;
  }
  return ignore;
}

std::vector<EvalRow> evaluate(const std::vector<std::vector<GroundTruth>>& gts,
                              const std::vector<std::vector<Detection>>& preds,
                              const EvalOptions& options) {
  if (gts.size() != preds.size()) throw ShapeError("ground-truth and prediction scene counts differ");
  const double threshold = options.iou_threshold.value_or(default_iou_threshold(options.object_class));
  const std::string cls(class_name(options.object_class));

  std::vector<MatchResult> plain, strata;
  for (std::size_t s = 0; s < gts.size(); ++s) {
    std::vector<GroundTruth> of_class;
    for (const auto& g : gts[s]) {
      if (g.object_class == options.object_class) of_class.push_back(g);
    }
    std::vector<Box3D> boxes;
    for (const auto& g : of_class) boxes.push_back(g.box);
    plain.push_back(match(boxes, preds[s], threshold));
    strata.push_back(match(boxes, preds[s], threshold, filter_difficulty(of_class, options.level)));
  }
  const PooledMatches pooled = PooledMatches::from(strata);
  const std::string level = difficulty_name(options.level);
  const double ap = pooled.n_gt ? average_precision(pooled, options.ap_points) : 0.0;
  const double recall = pooled.n_gt ? max_recall(pooled) : 0.0;

  std::size_t n_pred = 0;
  for (const auto& p : preds) n_pred += p.size();
  return {
      {"ratio", cls, "all", threshold, ratio(plain)},
      {options.ap_points == 40 ? "ap40" : "ap11", cls, level, threshold, ap},
      {"max_recall", cls, level, threshold, recall},
      {"max_recall_q40", cls, level, threshold, quantized_recall(recall)},
      {"n_gt", cls, level, threshold, static_cast<double>(pooled.n_gt)},
      {"n_pred", cls, level, threshold, static_cast<double>(n_pred)},
  };
}

void write_report_text(std::ostream& out, const std::vector<EvalRow>& rows) {
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s %s %s %.2f %.6f\n", r.metric.c_str(), r.object_class.c_str(),
                  r.level.c_str(), r.threshold, r.value);
    out << buf;
  }
}

void write_report_json(std::ostream& out, const std::vector<EvalRow>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    arr.push_back({{"metric", r.metric},
                   {"class", r.object_class},
                   {"level", r.level},
                   {"threshold", r.threshold},
                   {"value", r.value}});
  }
  out << arr.dump(2) << '\n';
}

}  // namespace epbrm
