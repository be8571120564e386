#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "epbrm/block.hpp"
#include "epbrm/errors.hpp"

namespace epbrm {

enum class OptimizerKind { kAdam, kSgd };

OptimizerKind parse_optimizer(std::string_view name);
std::string_view optimizer_name(OptimizerKind kind);

template <typename T>
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix<T>> first_moment;   // one per parameter tensor
  std::vector<Matrix<T>> second_moment;  // Adam only
};

/// Zeroed accumulators shaped like `params` (anything with for_each_tensor).
template <typename T, typename Params>
OptimizerState<T> make_optimizer(const Params& params, OptimizerKind kind,
                                 double learning_rate) {
  OptimizerState<T> state;
  state.kind = kind;
  state.learning_rate = learning_rate;
  params.for_each_tensor([&state, kind](Eigen::Map<const Matrix<T>> t) {
    state.first_moment.push_back(Matrix<T>::Zero(t.rows(), t.cols()));
    if (kind == OptimizerKind::kAdam) {
      state.second_moment.push_back(Matrix<T>::Zero(t.rows(), t.cols()));
    }
  });
  return state;
}

/// One update. Adam uses bias-corrected moments,
///   p -= lr * m_hat / (sqrt(v_hat) + eps);
/// SGD is p -= lr * g. Throws ShapeError when shapes disagree.
template <typename T, typename Params>
void optimizer_step(Params& params, const Params& grads, OptimizerState<T>& state) {
  std::vector<Eigen::Map<const Matrix<T>>> g;
  grads.for_each_tensor([&g](Eigen::Map<const Matrix<T>> t) { g.push_back(t); });
  if (g.size() != state.first_moment.size()) {
    throw ShapeError("optimizer state does not match the parameter list");
  }
  state.step += 1;
  const T lr = static_cast<T>(state.learning_rate);
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  const T eps = static_cast<T>(state.epsilon);
  const T c1 = static_cast<T>(1.0 - std::pow(state.beta1, static_cast<double>(state.step)));
  const T c2 = static_cast<T>(1.0 - std::pow(state.beta2, static_cast<double>(state.step)));
  std::size_t i = 0;
  params.for_each_tensor([&](Eigen::Map<Matrix<T>> p) {
    const auto& gi = g[i];
    if (gi.rows() != p.rows() || gi.cols() != p.cols() ||
        state.first_moment[i].rows() != p.rows() || state.first_moment[i].cols() != p.cols()) {
      throw ShapeError("gradient tensor " + std::to_string(i) + " has the wrong shape");
    }
    if (state.kind == OptimizerKind::kSgd) {
      p -= lr * gi;
    } else {
      Matrix<T>& m = state.first_moment[i];
      Matrix<T>& v = state.second_moment[i];
      m = b1 * m + (T(1) - b1) * gi;
      v = b2 * v + (T(1) - b2) * gi.cwiseProduct(gi);
      p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
    ++i;
  });
}

}  // namespace epbrm
