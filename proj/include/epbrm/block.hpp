#pragma once

// PointNet-style building block: a shared per-point MLP, a max-pool over
// points, then a head MLP. ReLU follows every layer except the last head
// layer. Points are the columns of a 3 x N matrix.

#include <Eigen/Core>
#include <cstddef>
#include <functional>
#include <vector>

#include "epbrm/rng.hpp"

namespace epbrm {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct DenseLayer {
  Matrix<T> weight;  // out x in
  Vector<T> bias;    // out
};

/// Layer widths of one block.
struct BlockShape {
  std::vector<int> point_widths{64, 128, 256};
  std::vector<int> head_widths{128};  // hidden head layers; output is appended
  int output_width = 1;

  friend bool operator==(const BlockShape&, const BlockShape&) = default;
};

template <typename T>
struct BlockParams {
  std::vector<DenseLayer<T>> point_layers;
  std::vector<DenseLayer<T>> head_layers;

  int output_width() const {
    return static_cast<int>(head_layers.back().bias.size());
  }
  BlockShape shape() const;
  std::size_t parameter_count() const;

  /// Same shapes, all zero.
  BlockParams zeros_like() const;

  /// Visits weight then bias of each point layer, then of each head layer.
  void for_each_tensor(const std::function<void(Eigen::Map<Matrix<T>>)>& fn);
  void for_each_tensor(
      const std::function<void(Eigen::Map<const Matrix<T>>)>& fn) const;

  template <typename U>
  BlockParams<U> cast() const;
};

/// Glorot-uniform weights, zero biases.
template <typename T>
BlockParams<T> init_block(const BlockShape& shape, Rng& rng);

template <typename T>
struct BlockCache {
  std::vector<Matrix<T>> point_inputs;  // input to each point layer (3 x N first)
  std::vector<Matrix<T>> point_pre;     // pre-activation of each point layer
  std::vector<Eigen::Index> argmax;     // winning point per pooled feature
  std::vector<Vector<T>> head_inputs;
  std::vector<Vector<T>> head_pre;
  Eigen::Index n_points = 0;
};

/// Throws EmptyCloudError for N == 0 and ShapeError when the cloud is not 3 x N.
template <typename T>
Vector<T> block_forward(const Matrix<T>& cloud, const BlockParams<T>& params,
                        BlockCache<T>& cache);

/// Writes parameter gradients into `grads` (overwriting) and returns the
/// gradient with respect to the input cloud. Throws ShapeError when d_output
/// or grads do not match.
template <typename T>
Matrix<T> block_backward(const BlockCache<T>& cache, const BlockParams<T>& params,
                         const Vector<T>& d_output, BlockParams<T>& grads);

template <typename T>
template <typename U>
BlockParams<U> BlockParams<T>::cast() const {
  BlockParams<U> out;
  for (const auto& l : point_layers) {
    out.point_layers.push_back({l.weight.template cast<U>(), l.bias.template cast<U>()});
  }
  for (const auto& l : head_layers) {
    out.head_layers.push_back({l.weight.template cast<U>(), l.bias.template cast<U>()});
  }
  return out;
}

}  // namespace epbrm
