#pragma once

#include "epbrm/geometry.hpp"
#include "epbrm/model.hpp"

namespace epbrm {

/// 0.5 r^2 for |r| <= delta, delta (|r| - 0.5 delta) beyond.
double huber(double residual, double delta);
double huber_derivative(double residual, double delta);

/// Regression target in the proposal frame (origin at the proposal location).
struct BoxTarget {
  Point3 location;  // object center relative to the proposal
  double yaw = 0.0;
  BoxSize size;
  Point3 center_offset;  // supervision for centering stages; equals location

  Box3D box() const { return {location, size, yaw}; }
};

/// Per-term multipliers; the defaults give the plain unweighted sum.
struct LossWeights {
  double loc = 1.0;
  double rot_cls = 1.0;
  double rot_reg = 1.0;
  double size = 1.0;
  double loc_center = 1.0;
  double huber_delta = 1.0;
};

struct LossBreakdown {
  double loc = 0.0;
  double rot_cls = 0.0;
  double rot_reg = 0.0;
  double size = 0.0;
  double loc_center = 0.0;
  bool has_loc_center = false;
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown scaled(double s) const;
};

struct LossResult {
  LossBreakdown loss;
  PredictionGrad grad;  // d total / d raw outputs
};

/// Multi-task loss. The target is carried through the predicted stage
/// transforms into the final frame, where location, rotation and size are
/// scored; centering stages are additionally scored against the object
/// center in their own input frame. Gradients include the dependence of the
/// carried target on the stage outputs.
LossResult multitask_loss(const BoxPrediction& pred, const BoxTarget& target,
                          const ModelConfig& config, const LossWeights& weights = {});

}  // namespace epbrm
