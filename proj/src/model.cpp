#include "epbrm/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "epbrm/errors.hpp"

namespace epbrm {

namespace {

constexpr std::uint64_t kInitSalt = 0x1a11;
constexpr std::uint64_t kResampleSalt = 0x5e1ec7;

BlockShape block_shape(const ModelConfig& c, int output_width) {
  BlockShape s;
  s.point_widths = c.point_widths;
  s.head_widths = c.head_widths;
  s.output_width = output_width;
  return s;
}

template <typename T>
std::vector<double> to_doubles(const Vector<T>& v) {
  std::vector<double> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v(i);
  return out;
}

template <typename T>
Vector<T> from_doubles(const std::vector<double>& v) {
  Vector<T> out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = static_cast<T>(v[i]);
  return out;
}

template <typename T>
Matrix<T> apply_to_cloud(const StageTransform& tr, const Matrix<T>& x) {
  Matrix<T> y = x;
  switch (tr.kind) {
    case Mechanism::kTranslation:
    case Mechanism::kCentering:
      y.row(0).array() -= static_cast<T>(tr.offset.x);
      y.row(1).array() -= static_cast<T>(tr.offset.y);
      y.row(2).array() -= static_cast<T>(tr.offset.z);
      break;
    case Mechanism::kRotation: {
      const T c = static_cast<T>(std::cos(tr.angle));
      const T s = static_cast<T>(std::sin(tr.angle));
      y.row(0) = c * x.row(0) - s * x.row(1);
      y.row(1) = s * x.row(0) + c * x.row(1);
      break;
    }
    case Mechanism::kScaling:
      y.row(0) /= static_cast<T>(tr.scale_xy);
      y.row(1) /= static_cast<T>(tr.scale_xy);
      y.row(2) /= static_cast<T>(tr.scale_z);
      break;
  }
  return y;
}

// Backward of apply_to_cloud; accumulates into d_raw and returns d_x.
template <typename T>
Matrix<T> apply_to_cloud_backward(const StageTransform& tr, std::span<const double> raw,
                                  const TransformBounds& bounds, const Matrix<T>& x,
                                  const Matrix<T>& y, const Matrix<T>& d_y,
                                  std::span<double> d_raw) {
  switch (tr.kind) {
    case Mechanism::kTranslation:
    case Mechanism::kCentering: {
      const double bx = bounded_derivative(raw[0], bounds.translation.x);
      const double by = bounded_derivative(raw[1], bounds.translation.y);
      const double bz = bounded_derivative(raw[2], bounds.translation.z);
      d_raw[0] -= bx * static_cast<double>(d_y.row(0).template cast<double>().sum());
      d_raw[1] -= by * static_cast<double>(d_y.row(1).template cast<double>().sum());
      d_raw[2] -= bz * static_cast<double>(d_y.row(2).template cast<double>().sum());
      return d_y;
    }
    case Mechanism::kRotation: {
      const T c = static_cast<T>(std::cos(tr.angle));
      const T s = static_cast<T>(std::sin(tr.angle));
      const double d_angle =
          (-d_y.row(0).template cast<double>().cwiseProduct(y.row(1).template cast<double>()) +
           d_y.row(1).template cast<double>().cwiseProduct(y.row(0).template cast<double>()))
              .sum();
      d_raw[0] += d_angle * bounded_derivative(raw[0], bounds.rotation);
      Matrix<T> d_x = d_y;
      d_x.row(0) = c * d_y.row(0) + s * d_y.row(1);
      d_x.row(1) = -s * d_y.row(0) + c * d_y.row(1);
      return d_x;
    }
    case Mechanism::kScaling: {
      const double sxy = tr.scale_xy, sz = tr.scale_z;
      const double d_sxy =
          -(d_y.row(0).template cast<double>().cwiseProduct(x.row(0).template cast<double>()).sum() +
            d_y.row(1).template cast<double>().cwiseProduct(x.row(1).template cast<double>()).sum()) /
          (sxy * sxy);
      const double d_sz =
          -d_y.row(2).template cast<double>().cwiseProduct(x.row(2).template cast<double>()).sum() /
          (sz * sz);
      d_raw[0] += d_sxy * bounded_scale_derivative(raw[0], bounds.scale_xy);
      d_raw[1] += d_sz * bounded_scale_derivative(raw[1], bounds.scale_z);
      Matrix<T> d_x = d_y;
      d_x.row(0) /= static_cast<T>(sxy);
      d_x.row(1) /= static_cast<T>(sxy);
      d_x.row(2) /= static_cast<T>(sz);
      return d_x;
    }
  }
  return d_y;
}

}  // namespace

bool ModelConfig::has_centering() const {
  return std::find(mechanisms.begin(), mechanisms.end(), Mechanism::kCentering) !=
         mechanisms.end();
}

void ModelConfig::validate() const {
  if (!(dist_bound > 0.0) || !std::isfinite(dist_bound)) {
    throw ConfigError("dist_bound must be positive");
  }
  if (rotation_bins < 2) throw ConfigError("rotation_bins must be at least 2");
  if (n_points < 1) throw ConfigError("n_points must be at least 1");
  if (point_widths.empty()) throw ConfigError("at least one per-point layer is required");
  for (int w : point_widths) {
    if (w < 1) throw ConfigError("layer widths must be positive");
  }
  for (int w : head_widths) {
    if (w < 1) throw ConfigError("layer widths must be positive");
  }
}

template <typename T>
EpbrmModel<T> EpbrmModel<T>::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng = Rng::stream(seed, 0, kInitSalt);
  EpbrmModel<T> m;
  m.config = config;
  for (Mechanism kind : config.mechanisms) {
    m.stages.push_back(
        {kind, init_block<T>(block_shape(config, mechanism_output_width(kind)), rng)});
  }
  m.head = init_block<T>(
      block_shape(config, static_cast<int>(head_output_width(config.bins()))), rng);
  return m;
}

template <typename T>
EpbrmModel<T> EpbrmModel<T>::zeros_like() const {
  EpbrmModel<T> out;
  out.config = config;
  for (const auto& s : stages) out.stages.push_back({s.kind, s.block.zeros_like()});
  out.head = head.zeros_like();
  return out;
}

template <typename T>
std::size_t EpbrmModel<T>::parameter_count() const {
  std::size_t n = head.parameter_count();
  for (const auto& s : stages) n += s.block.parameter_count();
  return n;
}

template <typename T>
void EpbrmModel<T>::for_each_tensor(const std::function<void(Eigen::Map<Matrix<T>>)>& fn) {
  for (auto& s : stages) s.block.for_each_tensor(fn);
  head.for_each_tensor(fn);
}

template <typename T>
void EpbrmModel<T>::for_each_tensor(
    const std::function<void(Eigen::Map<const Matrix<T>>)>& fn) const {
  for (const auto& s : stages) s.block.for_each_tensor(fn);
  head.for_each_tensor(fn);
}

template <typename T>
void EpbrmModel<T>::add(const EpbrmModel& other) {
  std::vector<Eigen::Map<const Matrix<T>>> src;
  other.for_each_tensor([&src](Eigen::Map<const Matrix<T>> t) { src.push_back(t); });
  std::size_t i = 0;
  for_each_tensor([&](Eigen::Map<Matrix<T>> t) {
    if (i >= src.size() || src[i].rows() != t.rows() || src[i].cols() != t.cols()) {
      throw ShapeError("cannot add models with different shapes");
    }
    t += src[i++];
  });
}

PredictionGrad PredictionGrad::zeros_for(const BoxPrediction& p) {
  PredictionGrad g;
  g.head_raw.assign(p.head_raw.size(), 0.0);
  for (const auto& r : p.stage_raw) g.stage_raw.emplace_back(r.size(), 0.0);
  return g;
}

template <typename T>
Matrix<T> to_matrix(const PointCloud& cloud) {
  Matrix<T> m(3, static_cast<Eigen::Index>(cloud.size()));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    m(0, j) = static_cast<T>(cloud[i].x);
    m(1, j) = static_cast<T>(cloud[i].y);
    m(2, j) = static_cast<T>(cloud[i].z);
  }
  return m;
}

template <typename T>
PointCloud to_cloud(const Matrix<T>& m) {
  PointCloud out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    out[static_cast<std::size_t>(j)] = {static_cast<double>(m(0, j)),
                                        static_cast<double>(m(1, j)),
                                        static_cast<double>(m(2, j))};
  }
  return out;
}

template <typename T>
BoxPrediction epbrm_forward(const Matrix<T>& cloud, const EpbrmModel<T>& model,
                            const ForwardOptions& options, EpbrmCache<T>& cache) {
  const ModelConfig& cfg = model.config;
  const std::size_t n_stages = model.stages.size();
  if (options.replay && options.replay->size() != n_stages) {
    throw ShapeError("replayed selections do not match the number of stages");
  }
  const TransformBounds bounds = cfg.transform_bounds();
  const SamplingRegion region = cfg.region();
  const Point3 reference = region_reference({}, cfg.anchor());
  const auto n_points = static_cast<std::size_t>(cfg.n_points);

  BoxPrediction pred;
  cache.stage_inputs.resize(n_stages);
  cache.stage_outputs.resize(n_stages);
  cache.stage_blocks.resize(n_stages);
  cache.selections.resize(n_stages);

  Matrix<T> current = cloud;
  for (std::size_t k = 0; k < n_stages; ++k) {
    const Stage<T>& stage = model.stages[k];
    cache.stage_inputs[k] = std::move(current);
    const Vector<T> out = block_forward(cache.stage_inputs[k], stage.block, cache.stage_blocks[k]);
    pred.stage_raw.push_back(to_doubles(out));
    const StageTransform tr = decode_stage(stage.kind, pred.stage_raw.back(), bounds);
    pred.transforms.push_back(tr);
    cache.stage_outputs[k] = apply_to_cloud(tr, cache.stage_inputs[k]);
    const Matrix<T>& moved = cache.stage_outputs[k];

    std::vector<std::size_t>& selection = cache.selections[k];
    if (options.replay) {
      selection = (*options.replay)[k];
      for (std::size_t j : selection) {
        if (j >= static_cast<std::size_t>(moved.cols())) {
          throw ShapeError("replayed selection index out of range");
        }
      }
    } else {
      std::vector<std::size_t> kept;
      for (Eigen::Index j = 0; j < moved.cols(); ++j) {
        const Point3 p{static_cast<double>(moved(0, j)), static_cast<double>(moved(1, j)),
                       static_cast<double>(moved(2, j))};
        if (region.contains(reference, p)) kept.push_back(static_cast<std::size_t>(j));
      }
      if (kept.empty()) throw StageCropError(k);
      Rng rng = Rng::stream(options.seed, k, kResampleSalt);
      const auto picks = resample_indices(kept.size(), n_points, rng);
      selection.clear();
      selection.reserve(picks.size());
      for (std::size_t i : picks) selection.push_back(kept[i]);
    }
    current.resize(3, static_cast<Eigen::Index>(selection.size()));
    for (std::size_t i = 0; i < selection.size(); ++i) {
      current.col(static_cast<Eigen::Index>(i)) = moved.col(static_cast<Eigen::Index>(selection[i]));
    }
  }

  cache.head_input = std::move(current);
  const Vector<T> out = block_forward(cache.head_input, model.head, cache.head_block);
  pred.head_raw = to_doubles(out);
  const RawBoxOutput raw = RawBoxOutput::unpack(pred.head_raw, cfg.bins());
  pred.location = decode_location(raw.t_location, cfg.regression_bounds());
  pred.yaw = decode_rotation(raw.rot_cls, raw.rot_reg, cfg.bins());
  pred.size = decode_size(raw.t_size, cfg.anchor());

  Box3D box{pred.location, pred.size, wrap_angle(pred.yaw)};
  for (std::size_t k = n_stages; k-- > 0;) box = pred.transforms[k].unapply(box);
  pred.box = box;
  return pred;
}

template <typename T>
BoxPrediction epbrm_forward(const PointCloud& cloud, const EpbrmModel<T>& model,
                            const ForwardOptions& options, EpbrmCache<T>& cache) {
  const auto n = static_cast<std::size_t>(model.config.n_points);
  if (cloud.size() == n) return epbrm_forward(to_matrix<T>(cloud), model, options, cache);
  Rng rng = Rng::stream(options.seed, 0x7fff, kResampleSalt);
  return epbrm_forward(to_matrix<T>(resample_fixed(cloud, n, rng)), model, options, cache);
}

template <typename T>
EpbrmModel<T> epbrm_backward(const EpbrmModel<T>& model, const BoxPrediction& pred,
                             const EpbrmCache<T>& cache, const PredictionGrad& d_pred,
                             Matrix<T>* d_cloud) {
  const std::size_t n_stages = model.stages.size();
  if (d_pred.head_raw.size() != pred.head_raw.size() ||
      d_pred.stage_raw.size() != n_stages || cache.stage_blocks.size() != n_stages) {
    throw ShapeError("prediction gradient does not match the model");
  }
  const TransformBounds bounds = model.config.transform_bounds();
  EpbrmModel<T> grads = model.zeros_like();

  Matrix<T> d_current =
      block_backward(cache.head_block, model.head, from_doubles<T>(d_pred.head_raw), grads.head);

  for (std::size_t k = n_stages; k-- > 0;) {
    const Matrix<T>& moved = cache.stage_outputs[k];
    Matrix<T> d_moved = Matrix<T>::Zero(3, moved.cols());
    const auto& selection = cache.selections[k];
    for (std::size_t i = 0; i < selection.size(); ++i) {
      d_moved.col(static_cast<Eigen::Index>(selection[i])) +=
          d_current.col(static_cast<Eigen::Index>(i));
    }
    std::vector<double> d_raw = d_pred.stage_raw[k];
    if (d_raw.size() != pred.stage_raw[k].size()) {
      throw ShapeError("stage gradient width does not match the stage output");
    }
    Matrix<T> d_input = apply_to_cloud_backward(pred.transforms[k], pred.stage_raw[k], bounds,
                                                cache.stage_inputs[k], moved, d_moved, d_raw);
    d_input += block_backward(cache.stage_blocks[k], model.stages[k].block,
                              from_doubles<T>(d_raw), grads.stages[k].block);
    d_current = std::move(d_input);
  }
  if (d_cloud) *d_cloud = std::move(d_current);
  return grads;
}

#define EPBRM_INSTANTIATE(T)                                                              \
  template struct EpbrmModel<T>;                                                          \
  template Matrix<T> to_matrix<T>(const PointCloud&);                                     \
  template PointCloud to_cloud<T>(const Matrix<T>&);                                      \
  template BoxPrediction epbrm_forward<T>(const Matrix<T>&, const EpbrmModel<T>&,         \
                                          const ForwardOptions&, EpbrmCache<T>&);         \
  template BoxPrediction epbrm_forward<T>(const PointCloud&, const EpbrmModel<T>&,        \
                                          const ForwardOptions&, EpbrmCache<T>&);         \
  template EpbrmModel<T> epbrm_backward<T>(const EpbrmModel<T>&, const BoxPrediction&,    \
                                           const EpbrmCache<T>&, const PredictionGrad&,   \
                                           Matrix<T>*);

EPBRM_INSTANTIATE(float)
EPBRM_INSTANTIATE(double)

#undef EPBRM_INSTANTIATE

}  // namespace epbrm
