#include "epbrm/loss.hpp"

#include <algorithm>
#include <cmath>

#include "epbrm/errors.hpp"

namespace epbrm {

namespace {

double axis(const Point3& p, int i) { return i == 0 ? p.x : (i == 1 ? p.y : p.z); }
double& axis(Point3& p, int i) { return i == 0 ? p.x : (i == 1 ? p.y : p.z); }

// Huber on (value - clamp(target, +-0.999 bound)) / bound. Returns the loss and
// adds derivatives with respect to value and target.
double bounded_residual_loss(double value, double target, double bound, double delta,
                             double& d_value, double& d_target) {
  const double limit = 0.999 * bound;
  const double clamped = std::clamp(target, -limit, limit);
  const double r = (value - clamped) / bound;
  const double g = huber_derivative(r, delta) / bound;
  d_value += g;
  if (target > -limit && target < limit) d_target -= g;
  return huber(r, delta);
}

}  // namespace

double huber(double residual, double delta) {
  const double a = std::abs(residual);
  return a <= delta ? 0.5 * residual * residual : delta * (a - 0.5 * delta);
}

double huber_derivative(double residual, double delta) {
  return std::clamp(residual, -delta, delta);
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  loc += o.loc;
  rot_cls += o.rot_cls;
  rot_reg += o.rot_reg;
  size += o.size;
  loc_center += o.loc_center;
  has_loc_center = has_loc_center || o.has_loc_center;
  total += o.total;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double s) const {
  LossBreakdown out = *this;
  out.loc *= s;
  out.rot_cls *= s;
  out.rot_reg *= s;
  out.size *= s;
  out.loc_center *= s;
  out.total *= s;
  return out;
}

LossResult multitask_loss(const BoxPrediction& pred, const BoxTarget& target,
                          const ModelConfig& config, const LossWeights& weights) {
  const std::size_t n_stages = pred.transforms.size();
  if (pred.stage_raw.size() != n_stages) throw ShapeError("prediction is missing stage outputs");
  const TransformBounds tb = config.transform_bounds();
  const RegressionBounds rb = config.regression_bounds();
  const RotationBins bins = config.bins();
  const SizeAnchor anchor = config.anchor();
  const double delta = weights.huber_delta;
  const RawBoxOutput raw = RawBoxOutput::unpack(pred.head_raw, bins);

  LossResult result;
  result.grad = PredictionGrad::zeros_for(pred);
  LossBreakdown& loss = result.loss;
  std::vector<double>& d_head = result.grad.head_raw;

  // Target box as seen at the input of each stage and in the final frame.
  std::vector<Box3D> tracer{target.box()};
  for (const StageTransform& tr : pred.transforms) tracer.push_back(tr.apply(tracer.back()));
  const Box3D& final_box = tracer.back();
  BoxGrad d_box;

  for (int i = 0; i < 3; ++i) {
    double d_value = 0.0;
    loss.loc += bounded_residual_loss(axis(pred.location, i), axis(final_box.center, i),
                                      axis(rb.d, i), delta, d_value, axis(d_box.center, i));
    d_head[static_cast<std::size_t>(i)] =
        weights.loc * d_value * bounded_derivative(axis(raw.t_location, i), axis(rb.d, i));
  }
  axis(d_box.center, 0) *= weights.loc;
  axis(d_box.center, 1) *= weights.loc;
  axis(d_box.center, 2) *= weights.loc;

  const EncodedRotation enc = encode_rotation(final_box.yaw, bins);
  const auto n_bins = static_cast<std::size_t>(bins.count);
  const double max_logit = *std::max_element(raw.rot_cls.begin(), raw.rot_cls.end());
  double sum_exp = 0.0;
  for (double v : raw.rot_cls) sum_exp += std::exp(v - max_logit);
  const double log_norm = max_logit + std::log(sum_exp);
  loss.rot_cls = log_norm - raw.rot_cls[static_cast<std::size_t>(enc.bin)];
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double p = std::exp(raw.rot_cls[b] - log_norm);
    d_head[6 + b] = weights.rot_cls * (p - (b == static_cast<std::size_t>(enc.bin) ? 1.0 : 0.0));
  }

  // Only the target bin's residual is regressed.
  const double r_rot = raw.rot_reg[static_cast<std::size_t>(enc.bin)] - enc.residual;
  loss.rot_reg = huber(r_rot, delta);
  const double g_rot = weights.rot_reg * huber_derivative(r_rot, delta);
  d_head[6 + n_bins + static_cast<std::size_t>(enc.bin)] = g_rot;
  d_box.yaw = -g_rot / bins.half_width();

  const Point3 size_target = encode_size(final_box.size, anchor);
  const double sizes[3] = {final_box.size.h, final_box.size.w, final_box.size.l};
  for (int i = 0; i < 3; ++i) {
    const double r = axis(raw.t_size, i) - axis(size_target, i);
    loss.size += huber(r, delta);
    const double g = weights.size * huber_derivative(r, delta);
    d_head[3 + static_cast<std::size_t>(i)] = g;
    axis(d_box.size, i) = -g / sizes[i];
  }

  // The centering supervision point is carried separately from the box.
  loss.has_loc_center = config.has_centering();
  std::vector<Point3> centers{target.center_offset};
  for (const StageTransform& tr : pred.transforms) centers.push_back(tr.apply(centers.back()));
  Point3 d_center;
  for (std::size_t k = n_stages; k-- > 0;) {
    const StageTransform& tr = pred.transforms[k];
    std::vector<double>& d_raw = result.grad.stage_raw[k];
    d_box = apply_backward(tr, pred.stage_raw[k], tb, tracer[k], d_box, d_raw);
    d_center = apply_backward(tr, pred.stage_raw[k], tb, centers[k], d_center, d_raw);
    if (tr.kind != Mechanism::kCentering) continue;
    for (int i = 0; i < 3; ++i) {
      double d_value = 0.0, d_target = 0.0;
      const double bound = axis(tb.translation, i);
      loss.loc_center += bounded_residual_loss(axis(tr.offset, i), axis(centers[k], i), bound,
                                               delta, d_value, d_target);
      d_raw[static_cast<std::size_t>(i)] +=
          weights.loc_center * d_value *
          bounded_derivative(pred.stage_raw[k][static_cast<std::size_t>(i)], bound);
      axis(d_center, i) += weights.loc_center * d_target;
    }
  }

  loss.total = weights.loc * loss.loc + weights.rot_cls * loss.rot_cls +
               weights.rot_reg * loss.rot_reg + weights.size * loss.size +
               (loss.has_loc_center ? weights.loc_center * loss.loc_center : 0.0);
  return result;
}

}  // namespace epbrm
