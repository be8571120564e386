#include "epbrm/block.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "epbrm/errors.hpp"

namespace epbrm {

namespace {

template <typename T>
DenseLayer<T> glorot_layer(int in, int out, Rng& rng) {
  DenseLayer<T> layer{Matrix<T>(out, in), Vector<T>::Zero(out)};
  const double limit = std::sqrt(6.0 / (in + out));
  // Row-major fill order keeps the draw sequence independent of Eigen storage.
  for (int r = 0; r < out; ++r) {
    for (int c = 0; c < in; ++c) {
      layer.weight(r, c) = static_cast<T>(rng.uniform(-limit, limit));
    }
  }
  return layer;
}

template <typename T>
bool same_shapes(const BlockParams<T>& a, const BlockParams<T>& b) {
  if (a.point_layers.size() != b.point_layers.size() ||
      a.head_layers.size() != b.head_layers.size()) {
    return false;
  }
  auto layer_eq = [](const DenseLayer<T>& x, const DenseLayer<T>& y) {
    return x.weight.rows() == y.weight.rows() && x.weight.cols() == y.weight.cols() &&
           x.bias.size() == y.bias.size();
  };
  for (std::size_t i = 0; i < a.point_layers.size(); ++i) {
    if (!layer_eq(a.point_layers[i], b.point_layers[i])) return false;
  }
  for (std::size_t i = 0; i < a.head_layers.size(); ++i) {
    if (!layer_eq(a.head_layers[i], b.head_layers[i])) return false;
  }
  return true;
}

}  // namespace

template <typename T>
BlockShape BlockParams<T>::shape() const {
  BlockShape s;
  s.point_widths.clear();
  s.head_widths.clear();
  for (const auto& l : point_layers) s.point_widths.push_back(static_cast<int>(l.bias.size()));
  for (std::size_t i = 0; i + 1 < head_layers.size(); ++i) {
    s.head_widths.push_back(static_cast<int>(head_layers[i].bias.size()));
  }
  s.output_width = output_width();
  return s;
}

template <typename T>
std::size_t BlockParams<T>::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&n](Eigen::Map<const Matrix<T>> t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

template <typename T>
BlockParams<T> BlockParams<T>::zeros_like() const {
  BlockParams<T> out = *this;
  out.for_each_tensor([](Eigen::Map<Matrix<T>> t) { t.setZero(); });
  return out;
}

template <typename T>
void BlockParams<T>::for_each_tensor(
    const std::function<void(Eigen::Map<Matrix<T>>)>& fn) {
  for (auto* layers : {&point_layers, &head_layers}) {
    for (auto& l : *layers) {
      fn(Eigen::Map<Matrix<T>>(l.weight.data(), l.weight.rows(), l.weight.cols()));
      fn(Eigen::Map<Matrix<T>>(l.bias.data(), l.bias.size(), 1));
    }
  }
}

template <typename T>
void BlockParams<T>::for_each_tensor(
    const std::function<void(Eigen::Map<const Matrix<T>>)>& fn) const {
  for (const auto* layers : {&point_layers, &head_layers}) {
    for (const auto& l : *layers) {
      fn(Eigen::Map<const Matrix<T>>(l.weight.data(), l.weight.rows(), l.weight.cols()));
      fn(Eigen::Map<const Matrix<T>>(l.bias.data(), l.bias.size(), 1));
    }
  }
}

template <typename T>
BlockParams<T> init_block(const BlockShape& shape, Rng& rng) {
  if (shape.point_widths.empty() || shape.output_width <= 0) {
    throw ConfigError("a block needs at least one point layer and a positive output width");
  }
  BlockParams<T> p;
  int in = 3;
  for (int w : shape.point_widths) {
    p.point_layers.push_back(glorot_layer<T>(in, w, rng));
    in = w;
  }
  for (int w : shape.head_widths) {
    p.head_layers.push_back(glorot_layer<T>(in, w, rng));
    in = w;
  }
  p.head_layers.push_back(glorot_layer<T>(in, shape.output_width, rng));
  return p;
}

template <typename T>
Vector<T> block_forward(const Matrix<T>& cloud, const BlockParams<T>& params,
                        BlockCache<T>& cache) {
  if (cloud.rows() != 3) {
    throw ShapeError("block input must be 3 x N, got " + std::to_string(cloud.rows()) +
                     " rows");
  }
  if (cloud.cols() == 0) throw EmptyCloudError("cannot max-pool an empty cloud");
  const std::size_t n_point = params.point_layers.size();
  cache.n_points = cloud.cols();
  cache.point_inputs.resize(n_point);
  cache.point_pre.resize(n_point);

  const Matrix<T>* input = &cloud;
  cache.point_inputs[0] = cloud;
  for (std::size_t i = 0; i < n_point; ++i) {
    const auto& layer = params.point_layers[i];
    Matrix<T>& pre = cache.point_pre[i];
    pre.noalias() = layer.weight * *input;
    pre.colwise() += layer.bias;
    if (i + 1 < n_point) {
      cache.point_inputs[i + 1] = pre.cwiseMax(T(0));
      input = &cache.point_inputs[i + 1];
    }
  }

  // Max-pool of ReLU(pre) equals ReLU of the max-pool; ties keep the first point.
  const Matrix<T>& last = cache.point_pre.back();
  const Eigen::Index features = last.rows();
  Vector<T> pooled(features);
  cache.argmax.resize(static_cast<std::size_t>(features));
  for (Eigen::Index f = 0; f < features; ++f) {
    Eigen::Index best = 0;
    T value = last(f, 0);
    for (Eigen::Index j = 1; j < last.cols(); ++j) {
      if (last(f, j) > value) {
        value = last(f, j);
        best = j;
      }
    }
    cache.argmax[static_cast<std::size_t>(f)] = best;
    pooled(f) = value > T(0) ? value : T(0);
  }

  const std::size_t n_head = params.head_layers.size();
  cache.head_inputs.resize(n_head);
  cache.head_pre.resize(n_head);
  Vector<T> x = std::move(pooled);
  for (std::size_t i = 0; i < n_head; ++i) {
    const auto& layer = params.head_layers[i];
    cache.head_inputs[i] = x;
    cache.head_pre[i] = layer.weight * x + layer.bias;
    x = (i + 1 < n_head) ? Vector<T>(cache.head_pre[i].cwiseMax(T(0)))
                         : cache.head_pre[i];
  }
  return x;
}

template <typename T>
Matrix<T> block_backward(const BlockCache<T>& cache, const BlockParams<T>& params,
                         const Vector<T>& d_output, BlockParams<T>& grads) {
  if (d_output.size() != params.output_width()) {
    throw ShapeError("d_output has " + std::to_string(d_output.size()) +
                     " entries, block output has " +
                     std::to_string(params.output_width()));
  }
  if (cache.point_pre.size() != params.point_layers.size() ||
      cache.head_pre.size() != params.head_layers.size()) {
    throw ShapeError("cache does not come from a forward pass of these parameters");
  }
  if (!same_shapes(params, grads)) grads = params.zeros_like();

  Vector<T> d = d_output;
  for (std::size_t i = params.head_layers.size(); i-- > 0;) {
    if (i + 1 < params.head_layers.size()) {
      d = (cache.head_pre[i].array() > T(0)).select(d, T(0));
    }
    grads.head_layers[i].weight.noalias() = d * cache.head_inputs[i].transpose();
    grads.head_layers[i].bias = d;
    d = params.head_layers[i].weight.transpose() * d;
  }

  // Only points that win at least one active pooled feature receive gradient,
  // so the per-point backward runs on those columns alone.
  const std::size_t n_point = params.point_layers.size();
  const Matrix<T>& last_pre = cache.point_pre.back();
  std::vector<Eigen::Index> column_of(static_cast<std::size_t>(cache.n_points), -1);
  std::vector<Eigen::Index> winners;
  for (Eigen::Index f = 0; f < d.size(); ++f) {
    const Eigen::Index j = cache.argmax[static_cast<std::size_t>(f)];
    if (last_pre(f, j) > T(0) && column_of[static_cast<std::size_t>(j)] < 0) {
      column_of[static_cast<std::size_t>(j)] = 0;
      winners.push_back(j);
    }
  }
  std::sort(winners.begin(), winners.end());
  for (std::size_t k = 0; k < winners.size(); ++k) {
    column_of[static_cast<std::size_t>(winners[k])] = static_cast<Eigen::Index>(k);
  }
  const auto n_win = static_cast<Eigen::Index>(winners.size());

  Matrix<T> d_pre = Matrix<T>::Zero(last_pre.rows(), n_win);
  for (Eigen::Index f = 0; f < d.size(); ++f) {
    const Eigen::Index j = cache.argmax[static_cast<std::size_t>(f)];
    if (last_pre(f, j) > T(0)) d_pre(f, column_of[static_cast<std::size_t>(j)]) = d(f);
  }
  for (std::size_t i = n_point; i-- > 0;) {
    const Matrix<T>& input = cache.point_inputs[i];
    Matrix<T> in_cols(input.rows(), n_win);
    for (Eigen::Index k = 0; k < n_win; ++k) in_cols.col(k) = input.col(winners[k]);
    if (i + 1 < n_point) {
      const Matrix<T>& pre = cache.point_pre[i];
      for (Eigen::Index k = 0; k < n_win; ++k) {
        d_pre.col(k) = (pre.col(winners[k]).array() > T(0)).select(d_pre.col(k), T(0));
      }
    }
    grads.point_layers[i].weight.noalias() = d_pre * in_cols.transpose();
    grads.point_layers[i].bias = d_pre.rowwise().sum();
    Matrix<T> d_in = params.point_layers[i].weight.transpose() * d_pre;
    d_pre = std::move(d_in);
  }

  Matrix<T> d_cloud = Matrix<T>::Zero(3, cache.n_points);
  for (Eigen::Index k = 0; k < n_win; ++k) d_cloud.col(winners[k]) = d_pre.col(k);
  return d_cloud;
}

template struct BlockParams<float>;
template struct BlockParams<double>;
template BlockParams<float> init_block<float>(const BlockShape&, Rng&);
template BlockParams<double> init_block<double>(const BlockShape&, Rng&);
template Vector<float> block_forward<float>(const Matrix<float>&, const BlockParams<float>&,
                                            BlockCache<float>&);
template Vector<double> block_forward<double>(const Matrix<double>&,
                                              const BlockParams<double>&,
                                              BlockCache<double>&);
template Matrix<float> block_backward<float>(const BlockCache<float>&,
                                             const BlockParams<float>&,
                                             const Vector<float>&, BlockParams<float>&);
template Matrix<double> block_backward<double>(const BlockCache<double>&,
                                               const BlockParams<double>&,
                                               const Vector<double>&,
                                               BlockParams<double>&);

}  // namespace epbrm
