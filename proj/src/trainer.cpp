#include "epbrm/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <thread>

#include "epbrm/errors.hpp"

namespace epbrm {

namespace {

constexpr std::uint64_t kBatchSalt = 0xba7c;

constexpr std::uint64_t kPoolSalt = 0xf1c5;

struct SampleResult {
  bool ok = false;
  LossBreakdown loss;
  EpbrmModel<float> grad;
};

struct PreparedSample {
  TrainingSample sample;
  std::uint64_t forward_seed = 0;
};

PreparedSample prepare(const TrainObject& object, std::uint64_t sample_seed, const AugmentConfig& aug) {
  Rng rng(sample_seed);
  const AugmentDraw draw = draw_augment(aug, rng);
  PreparedSample p;
  p.sample = make_training_sample(object.crop, object.gt, aug, draw, rng);
  p.forward_seed = rng.next();
  return p;
}

SampleResult run_sample(const PreparedSample& prepared, const EpbrmModel<float>& model,
                        const LossWeights& weights) {
  SampleResult r;
  const TrainingSample& sample = prepared.sample;
  ForwardOptions opts;
  opts.seed = prepared.forward_seed;
  EpbrmCache<float> cache;
  BoxPrediction pred;
  try {
    pred = epbrm_forward(to_matrix<float>(sample.cloud), model, opts, cache);
  } catch (const StageCropError&) {
    return r;
  }
  const LossResult loss = multitask_loss(pred, sample.target, model.config, weights);
  r.grad = epbrm_backward(model, pred, cache, loss.grad);
  r.loss = loss.loss;
  r.ok = true;
  return r;
}

}  // namespace

AugmentConfig TrainerConfig::augment() const {
  AugmentConfig a = AugmentConfig::for_model(model);
  a.scale_min = scale_min;
  a.scale_max = scale_max;
  return a;
}

void TrainerConfig::validate() const {
  model.validate();
  augment().validate();
  if (iterations < 0) throw ConfigError("iterations must be nonnegative");
  if (batch < 1) throw ConfigError("batch must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be nonnegative");
  if (checkpoint_every < 0) throw ConfigError("checkpoint interval must be nonnegative");
  if (fixed_samples < 0) throw ConfigError("fixed sample count must be nonnegative");
}

std::vector<TrainObject> make_train_objects(const PointCloud& scene, const std::vector<Box3D>& boxes,
                                            const AugmentConfig& cfg, std::size_t min_points) {
  std::vector<TrainObject> out;
  for (const Box3D& b : boxes) {
    PointCloud crop = crop_for_box(scene, b, cfg);
    if (crop.size() >= std::max<std::size_t>(1, min_points)) out.push_back({std::move(crop), b});
  }
  return out;
}

Checkpoint train(const std::vector<TrainObject>& objects, const TrainerConfig& cfg,
                 std::optional<Checkpoint> resume,
                 const std::function<void(const IterationLog&)>& on_iteration) {
  cfg.validate();
  if (objects.empty()) throw ConfigError("no training objects");

  Checkpoint ckpt;
  if (resume) {
    if (!(resume->model.config == cfg.model)) {
      throw ConfigError("checkpoint model config differs from the training config");
    }
    if (resume->seed != cfg.seed) throw ConfigError("checkpoint seed differs from --seed");
    ckpt = std::move(*resume);
    if (!ckpt.optimizer) ckpt.optimizer = make_optimizer<float>(ckpt.model, cfg.optimizer, cfg.learning_rate);
  } else {
    ckpt.model = EpbrmModel<float>::init(cfg.model, cfg.seed);
    ckpt.seed = cfg.seed;
    ckpt.optimizer = make_optimizer<float>(ckpt.model, cfg.optimizer, cfg.learning_rate);
  }
  ckpt.optimizer->learning_rate = cfg.learning_rate;

  const AugmentConfig aug = cfg.augment();
  const auto batch = static_cast<std::size_t>(cfg.batch);
  const std::size_t threads =
      std::min<std::size_t>(batch, static_cast<std::size_t>(std::max(1, cfg.threads)));
  std::vector<SampleResult> results(batch);
  std::vector<std::size_t> picks(batch);
  std::vector<std::uint64_t> seeds(batch);

  std::vector<PreparedSample> pool;
  if (cfg.fixed_samples > 0) {
    Rng rng = Rng::stream(cfg.seed, 0, kPoolSalt);
    for (int i = 0; i < cfg.fixed_samples; ++i) {
      const std::size_t pick = rng.index(objects.size());
      pool.push_back(prepare(objects[pick], rng.next(), aug));
    }
  }

  for (std::int64_t it = ckpt.iteration + 1; it <= cfg.iterations; ++it) {
    Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(it), kBatchSalt);
    for (std::size_t b = 0; b < batch; ++b) {
      if (pool.empty()) {
        picks[b] = rng.index(objects.size());
        seeds[b] = rng.next();
      } else {
        picks[b] = (static_cast<std::size_t>(it - 1) * batch + b) % pool.size();
      }
    }
    auto work = [&](std::size_t b) {
      if (pool.empty()) {
        results[b] = run_sample(prepare(objects[picks[b]], seeds[b], aug), ckpt.model, cfg.weights);
      } else {
        results[b] = run_sample(pool[picks[b]], ckpt.model, cfg.weights);
      }
    };
    if (threads <= 1) {
      for (std::size_t b = 0; b < batch; ++b) work(b);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          for (std::size_t b = t; b < batch; b += threads) work(b);
        });
      }
      for (auto& th : pool) th.join();
    }

    IterationLog log;
    log.iteration = it;
    EpbrmModel<float> grad = ckpt.model.zeros_like();
    for (const SampleResult& r : results) {
      if (!r.ok) continue;
      grad.add(r.grad);
      log.loss += r.loss;
      ++log.samples;
    }
    if (log.samples > 0) {
      const float inv = 1.0f / static_cast<float>(log.samples);
      grad.for_each_tensor([inv](Eigen::Map<Matrix<float>> t) { t *= inv; });
      log.loss = log.loss.scaled(1.0 / log.samples);
      optimizer_step(ckpt.model, grad, *ckpt.optimizer);
    }
    log.loss.has_loc_center = cfg.model.has_centering();
    ckpt.iteration = it;
    if (on_iteration) on_iteration(log);
    if (!cfg.checkpoint_path.empty() && cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0) {
      save_checkpoint(cfg.checkpoint_path, ckpt);
    }
  }
  if (!cfg.checkpoint_path.empty()) save_checkpoint(cfg.checkpoint_path, ckpt);
  return ckpt;
}

void write_loss_header(std::ostream& out, bool has_loc_center) {
  out << "iter total loc rot_cls rot_reg size";
  if (has_loc_center) out << " loc_center";
  out << '\n';
}

void write_loss_line(std::ostream& out, const IterationLog& log, bool has_loc_center) {
  char buf[64];
  out << log.iteration;
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, " %.6e", v);
    out << buf;
  };
  put(log.loss.total);
  put(log.loss.loc);
  put(log.loss.rot_cls);
  put(log.loss.rot_reg);
  put(log.loss.size);
  if (has_loc_center) put(log.loss.loc_center);
  out << '\n';
}

}  // namespace epbrm
