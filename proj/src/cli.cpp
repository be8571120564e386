#include "epbrm/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "epbrm/augment.hpp"
#include "epbrm/checkpoint.hpp"
#include "epbrm/errors.hpp"
#include "epbrm/evaluator.hpp"
#include "epbrm/kitti.hpp"
#include "epbrm/refine.hpp"
#include "epbrm/synthetic.hpp"
#include "epbrm/trainer.hpp"

namespace epbrm {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSynthSalt = 0x5c3e;
constexpr std::uint64_t kLocalizerSalt = 0x10ca;
constexpr std::uint64_t kValSplitOffset = 1u << 20;

class UsageError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  std::string object_class = "car";
  double dist_bound = 0.15;
  std::string mechanisms = "centering";
  int rotation_bins = 12;
  int n_points = 256;
  int batch = 64;
  double lr = 5e-4;
  std::string optimizer = "adam";
  std::int64_t iters = 10000;
  std::uint64_t seed = 0;
  int threads = 0;
  bool force = false;

  // synth
  fs::path out_dir;
  int scenes = 500;
  double val_fraction = 0.2;
  int objects = 8;
  int points_per_object = 400;
  double ground_density = 0.5;
  double clutter_rate = 0.05;

  // train
  fs::path data;
  fs::path split;
  fs::path checkpoint;
  fs::path log;
  fs::path resume;
  std::int64_t checkpoint_every = 1000;
  int min_points = 5;
  int fixed_samples = 0;

  // refine
  fs::path detections;
  fs::path pred;
  fs::path proposals_out;
  double proposal_yaw = 0.0;
  std::string noise_kind = "uniform";
  double noise = 0.15;
  double fn_rate = 0.0;
  double fp_rate = 0.0;

  // eval
  std::string level = "moderate";
  double iou = 0.0;
  int ap_points = 40;
  fs::path report;
  fs::path report_json;

  // sweep-dist
  std::vector<double> bounds;
  std::vector<double> noises;
  fs::path val_data;
  fs::path work_dir;

  // bench
  int bench_detections = 20;
  int reps = 100;
  int warmup = 10;
  std::string scene_id;

  int thread_count() const {
    if (threads > 0) return threads;
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
};

ModelConfig model_config(const RunConfig& c) {
  ModelConfig m;
  m.object_class = require_class(c.object_class);
  m.dist_bound = c.dist_bound;
  m.rotation_bins = c.rotation_bins;
  m.n_points = c.n_points;
  m.mechanisms = parse_mechanisms(c.mechanisms);
  m.validate();
  return m;
}

std::optional<fs::path> opt_path(const fs::path& p) {
  if (p.empty()) return std::nullopt;
  return p;
}

void require(const fs::path& p, const char* flag) {
  if (p.empty()) throw UsageError(std::string("missing required ") + flag);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const RunConfig& c, std::ostream& out) {
  require(c.out_dir, "--out");
  if (c.scenes < 0) throw UsageError("--scenes must be nonnegative");
  if (!(c.val_fraction >= 0.0 && c.val_fraction <= 1.0)) throw UsageError("--val-fraction must lie in [0, 1]");
  SceneSpec spec;
  spec.object_class = require_class(c.object_class);
  spec.n_objects = c.objects;
  spec.points_per_object = c.points_per_object;
  spec.ground_density = c.ground_density;
  spec.clutter_rate = c.clutter_rate;
  spec.validate();

  if (fs::exists(c.out_dir) && !fs::is_empty(c.out_dir)) {
    if (!c.force) throw Error(c.out_dir.string() + " exists and is not empty (use --force)");
    for (const char* split : {"train", "val"}) fs::remove_all(c.out_dir / split);
  }
  const int n_val = static_cast<int>(std::lround(c.val_fraction * c.scenes));
  const int n_train = c.scenes - n_val;
  const Calibration calib = synthetic_calibration();
  std::size_t objects = 0;
  for (int split = 0; split < 2; ++split) {
    const int count = split == 0 ? n_train : n_val;
    const DatasetLayout layout{c.out_dir / (split == 0 ? "train" : "val")};
    fs::create_directories(layout.root);
    for (const char* sub : {"velodyne", "calib", "label"}) fs::create_directories(layout.root / sub);
    for (int i = 0; i < count; ++i) {
      const std::uint64_t index = static_cast<std::uint64_t>(i) + (split ? kValSplitOffset : 0);
      Rng rng = Rng::stream(c.seed, index, kSynthSalt);
      Scene scene = generate_scene(spec, rng);
      char id[16];
      std::snprintf(id, sizeof id, "%06d", i);
      scene.id = id;
      for (auto& g : scene.ground_truths) g.height_px = image_box_height(g.box, calib);
      write_scene(layout, scene, calib);
      objects += scene.ground_truths.size();
    }
  }
  out << "scenes " << c.scenes << " (train " << n_train << ", val " << n_val << ") objects "
      << objects << '\n';
  return 0;
}

// ---------------------------------------------------------------- train

std::vector<Scene> load_scenes(const fs::path& root, const fs::path& split, bool require_labels) {
  const DatasetLayout layout{root};
  std::vector<Scene> scenes;
  for (const auto& id : layout.ids(opt_path(split))) scenes.push_back(read_scene(layout, id, require_labels));
  return scenes;
}

TrainerConfig trainer_config(const RunConfig& c) {
  TrainerConfig t;
  t.model = model_config(c);
  t.iterations = c.iters;
  t.batch = c.batch;
  t.learning_rate = c.lr;
  t.optimizer = parse_optimizer(c.optimizer);
  t.seed = c.seed;
  t.threads = c.thread_count();
  t.checkpoint_every = c.checkpoint_every;
  t.checkpoint_path = c.checkpoint;
  t.fixed_samples = c.fixed_samples;
  t.validate();
  return t;
}

Checkpoint train_from(const RunConfig& c, const std::vector<Scene>& scenes, std::ostream& out) {
  const TrainerConfig t = trainer_config(c);
  const ObjectClass cls = t.model.object_class;
  std::vector<TrainObject> objects;
  for (const Scene& s : scenes) {
    auto o = make_train_objects(s.cloud, s.boxes_of(cls), t.augment(),
                                static_cast<std::size_t>(std::max(1, c.min_points)));
    objects.insert(objects.end(), std::make_move_iterator(o.begin()), std::make_move_iterator(o.end()));
  }
  if (objects.empty()) throw Error("dataset holds no usable " + std::string(class_name(cls)) + " objects");

  std::optional<Checkpoint> resume;
  if (!c.resume.empty()) resume = load_checkpoint(c.resume);
  const bool appending = resume.has_value();

  std::ofstream log;
  const fs::path log_path = c.log.empty() ? fs::path(c.checkpoint.string() + ".log") : c.log;
  log.open(log_path, appending ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write loss log " + log_path.string());
  const bool lc = t.model.has_centering();
  if (!appending) write_loss_header(log, lc);

  out << "training " << objects.size() << ' ' << class_name(cls) << " objects, mechanisms "
      << (t.model.mechanisms.empty() ? "none" : format_mechanisms(t.model.mechanisms)) << ", "
      << t.iterations << " iterations\n";
  Checkpoint ckpt = train(objects, t, std::move(resume), [&](const IterationLog& l) {
    write_loss_line(log, l, lc);
  });
  out << "checkpoint " << c.checkpoint.string() << " iteration " << ckpt.iteration << '\n';
  return ckpt;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  require(c.data, "--data");
  require(c.checkpoint, "--checkpoint");
  {
    std::ofstream probe(c.checkpoint.string() + ".tmp");
    if (!probe) throw IoError("cannot write checkpoint " + c.checkpoint.string());
  }
  fs::remove(c.checkpoint.string() + ".tmp");
  train_from(c, load_scenes(c.data, c.split, true), out);
  return 0;
}

// ---------------------------------------------------------------- refine

LocalizerSpec localizer_spec(const RunConfig& c, double noise) {
  LocalizerSpec s;
  if (c.noise_kind == "uniform") {
    s.noise = NoiseKind::kUniform;
  } else if (c.noise_kind == "gaussian") {
    s.noise = NoiseKind::kGaussian;
  } else {
    throw UsageError("--noise-kind must be uniform or gaussian");
  }
  s.noise_scale = noise;
  s.false_negative_rate = c.fn_rate;
  s.false_positives = c.fp_rate;
  s.validate();
  return s;
}

Checkpoint load_model(const RunConfig& c, bool class_given, std::ostream&) {
  require(c.checkpoint, "--checkpoint");
  if (!fs::exists(c.checkpoint)) throw IoError("checkpoint " + c.checkpoint.string() + " does not exist");
  Checkpoint ckpt = load_checkpoint(c.checkpoint);
  if (class_given && require_class(c.object_class) != ckpt.model.config.object_class) {
    throw Error("checkpoint was trained for " + std::string(class_name(ckpt.model.config.object_class)) +
                ", not " + c.object_class);
  }
  return ckpt;
}

struct RefineStats {
  std::size_t detections = 0;
  std::size_t unrefined = 0;
};

RefineStats refine_dataset(const RunConfig& c, const EpbrmModel<float>& model, const fs::path& data,
                           const fs::path& pred_dir, double noise, std::ostream& err) {
  const ObjectClass cls = model.config.object_class;
  const DatasetLayout layout{data};
  fs::create_directories(pred_dir);
  if (!c.proposals_out.empty()) fs::create_directories(c.proposals_out);
  const LocalizerSpec loc = localizer_spec(c, noise);
  RefineStats stats;
  const auto ids = layout.ids(opt_path(c.split));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::string& id = ids[i];
    const Calibration calib = read_calibration(layout.calib(id));
    const bool simulated = c.detections.empty();
    const Scene scene = read_scene(layout, id, simulated);
    std::vector<Detection> dets;
    if (simulated) {
      Rng rng = Rng::stream(c.seed, i, kLocalizerSalt);
      dets = simulate_localizer(scene, cls, loc, rng);
    } else {
      const fs::path file = c.detections / (id + ".txt");
      if (fs::exists(file)) dets = read_predictions(file, calib, cls);
      for (auto& d : dets) d.box.reset();
    }
    if (!c.proposals_out.empty()) {
      std::vector<Detection> proposals = dets;
      for (auto& d : proposals) d.box = anchor_box(d.location, model.config, c.proposal_yaw);
      write_predictions(c.proposals_out / (id + ".txt"), proposals, calib, cls, model.config.anchor().size);
    }
    RefineConfig rc;
    rc.seed = Rng::stream(c.seed, i, kLocalizerSalt + 1).next();
    rc.threads = c.thread_count();
    const auto refined = refine(dets, scene.cloud, model, rc);
    for (std::size_t k = 0; k < refined.size(); ++k) {
      if (refined[k].unrefined) {
        ++stats.unrefined;
        err << "scene " << id << " detection " << k << " unrefined (no points in region)\n";
      }
    }
    stats.detections += refined.size();
    write_predictions(pred_dir / (id + ".txt"), refined, calib, cls, model.config.anchor().size);
  }
  return stats;
}

int cmd_refine(const RunConfig& c, bool class_given, std::ostream& out, std::ostream& err) {
  require(c.data, "--data");
  require(c.pred, "--pred");
  const Checkpoint ckpt = load_model(c, class_given, err);
  const RefineStats s = refine_dataset(c, ckpt.model, c.data, c.pred, c.noise, err);
  out << "refined " << s.detections - s.unrefined << " of " << s.detections << " detections ("
      << s.unrefined << " unrefined)\n";
  return 0;
}

// ---------------------------------------------------------------- eval

std::vector<EvalRow> evaluate_dirs(const RunConfig& c, const fs::path& data, const fs::path& pred) {
  const DatasetLayout layout{data};
  const ObjectClass cls = require_class(c.object_class);
  std::vector<std::vector<GroundTruth>> gts;
  std::vector<std::vector<Detection>> preds;
  for (const auto& id : layout.ids(opt_path(c.split))) {
    const Calibration calib = read_calibration(layout.calib(id));
    gts.push_back(read_labels(layout.label(id), calib));
    const fs::path file = pred / (id + ".txt");
    preds.push_back(fs::exists(file) ? read_predictions(file, calib, cls) : std::vector<Detection>{});
  }
  EvalOptions o;
  o.object_class = cls;
  o.level = parse_difficulty(c.level);
  if (c.iou > 0) o.iou_threshold = c.iou;
  o.ap_points = c.ap_points;
  return evaluate(gts, preds, o);
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  require(c.data, "--data");
  require(c.pred, "--pred");
  const auto rows = evaluate_dirs(c, c.data, c.pred);
  write_report_text(out, rows);
  if (!c.report.empty()) {
    std::ofstream f(c.report, std::ios::trunc);
    if (!f) throw IoError("cannot write " + c.report.string());
    write_report_text(f, rows);
  }
  if (!c.report_json.empty()) {
    std::ofstream f(c.report_json, std::ios::trunc);
    if (!f) throw IoError("cannot write " + c.report_json.string());
    write_report_json(f, rows);
  }
  return 0;
}

// ---------------------------------------------------------------- sweep-dist

double row_value(const std::vector<EvalRow>& rows, const std::string& metric) {
  for (const auto& r : rows) {
    if (r.metric == metric) return r.value;
  }
  return 0.0;
}

int cmd_sweep(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (c.bounds.empty()) throw UsageError("--bounds needs at least one value");
  require(c.data, "--data");
  require(c.val_data, "--val-data");
  require(c.work_dir, "--work-dir");
  fs::create_directories(c.work_dir);
  const std::vector<double> noises = c.noises.empty() ? std::vector<double>{0.15} : c.noises;
  std::vector<Scene> train_scenes;

  out << "dist_bound noise ratio ap40 max_recall\n";
  for (double bound : c.bounds) {
    RunConfig rc = c;
    rc.dist_bound = bound;
    const std::string tag = fmt("%.3f", bound);
    rc.checkpoint = c.work_dir / ("dist_" + tag + ".ckpt");
    rc.log = c.work_dir / ("dist_" + tag + ".log");
    rc.resume.clear();
    const ModelConfig want = model_config(rc);
    std::optional<Checkpoint> ckpt;
    if (fs::exists(rc.checkpoint)) {
      Checkpoint existing = load_checkpoint(rc.checkpoint);
      if (existing.model.config == want && existing.iteration == rc.iters && existing.seed == rc.seed) {
        ckpt = std::move(existing);
        err << "reusing " << rc.checkpoint.string() << '\n';
      }
    }
    if (!ckpt) {
      if (train_scenes.empty()) train_scenes = load_scenes(c.data, c.split, true);
      std::ostringstream quiet;
      ckpt = train_from(rc, train_scenes, quiet);
    }
    for (double noise : noises) {
      RunConfig ev = rc;
      ev.split.clear();
      ev.proposals_out.clear();
      const fs::path pred = c.work_dir / ("pred_" + tag + "_" + fmt("%.3f", noise));
      std::ostringstream quiet;
      refine_dataset(ev, ckpt->model, c.val_data, pred, noise, quiet);
      ev.level = "all";
      const auto rows = evaluate_dirs(ev, c.val_data, pred);
      out << tag << ' ' << fmt("%.3f", noise) << ' ' << fmt("%.6f", row_value(rows, "ratio")) << ' '
          << fmt("%.6f", row_value(rows, "ap40")) << ' ' << fmt("%.6f", row_value(rows, "max_recall"))
          << '\n';
    }
  }
  return 0;
}

// ---------------------------------------------------------------- bench

double median_ms(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_bench(const RunConfig& c, bool class_given, std::ostream& out, std::ostream& err) {
  require(c.data, "--data");
  if (c.bench_detections < 1 || c.reps < 1 || c.warmup < 0) {
    throw UsageError("--detections and --reps must be positive");
  }
  const Checkpoint ckpt = load_model(c, class_given, err);
  const EpbrmModel<float>& model = ckpt.model;
  const DatasetLayout layout{c.data};
  const auto ids = layout.ids(opt_path(c.split));
  if (ids.empty()) throw Error("dataset is empty");
  const Scene scene = read_scene(layout, c.scene_id.empty() ? ids.front() : c.scene_id, true);
  const ObjectClass cls = model.config.object_class;
  if (scene.boxes_of(cls).empty()) throw Error("scene " + scene.id + " holds no objects of the class");

  // Proposals cycle through the scene's objects until the requested count.
  Rng rng(c.seed);
  LocalizerSpec loc = localizer_spec(c, c.noise);
  std::vector<Detection> dets;
  while (static_cast<int>(dets.size()) < c.bench_detections) {
    for (const auto& d : simulate_localizer(scene, cls, loc, rng)) {
      if (static_cast<int>(dets.size()) < c.bench_detections) dets.push_back(d);
    }
  }

  using clock = std::chrono::steady_clock;
  std::vector<double> crop_ms, infer_ms;
  std::vector<Matrix<float>> clouds(dets.size());
  for (int rep = 0; rep < c.warmup + c.reps; ++rep) {
    const auto t0 = clock::now();
    for (std::size_t i = 0; i < dets.size(); ++i) {
      Rng r = Rng::stream(c.seed, i, 0xbe);
      PointCloud cloud = proposal_cloud(scene.cloud, dets[i].location, model.config, r);
      if (cloud.empty()) cloud.assign(static_cast<std::size_t>(model.config.n_points), Point3{});
      clouds[i] = to_matrix<float>(cloud);
    }
    const auto t1 = clock::now();
    for (std::size_t i = 0; i < dets.size(); ++i) {
      EpbrmCache<float> cache;
      ForwardOptions opts;
      opts.seed = i;
      try {
        epbrm_forward(clouds[i], model, opts, cache);
      } catch (const StageCropError&) {
      }
    }
    const auto t2 = clock::now();
    if (rep >= c.warmup) {
      crop_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      infer_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
    }
  }
  const std::string mech =
      model.config.mechanisms.empty() ? "none" : format_mechanisms(model.config.mechanisms);
  out << "detections " << dets.size() << " repetitions " << c.reps << " mechanisms " << mech << '\n';
  out << "crop_resample_ms " << fmt("%.3f", median_ms(crop_ms)) << '\n';
  out << "inference_ms " << fmt("%.3f", median_ms(infer_ms)) << '\n';
  out << "reference (published GPU figures, not asserted): sampling 6.5 ms, inference 5.5 ms with one "
         "transformation mechanism\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Endpoint box regression toolkit", "epbrm"};
  app.set_config("--config", "", "Flat key = value file; command-line flags override it");
  app.require_subcommand(1);

  app.add_option("--class", c.object_class, "Object class: car, pedestrian or cyclist");
  app.add_option("--dist-bound", c.dist_bound, "Correctable proposal error, meters");
  app.add_option("--mechanisms", c.mechanisms,
                 "Comma-separated stages from translation, centering, rotation, scaling, or none");
  app.add_option("--rotation-bins", c.rotation_bins, "Rotation bins over [0, pi)");
  app.add_option("--n-points", c.n_points, "Points per network input");
  app.add_option("--iters", c.iters, "Training iterations");
  app.add_option("--batch", c.batch, "Samples per iteration");
  app.add_option("--lr", c.lr, "Learning rate");
  app.add_option("--optimizer", c.optimizer, "adam or sgd");
  app.add_option("--seed", c.seed, "Root random seed");
  app.add_option("--threads", c.threads, "Worker threads (default: all cores)");
  app.add_flag("--force", c.force, "Overwrite existing outputs");
  app.add_option("--data", c.data, "Dataset split directory");
  app.add_option("--split", c.split, "File listing frame ids to use");
  app.add_option("--checkpoint", c.checkpoint, "Checkpoint path");
  app.add_option("--pred", c.pred, "Prediction directory");
  app.add_option("--noise", c.noise, "Simulated localizer noise (half-width or sigma), meters");
  app.add_option("--noise-kind", c.noise_kind, "uniform or gaussian");
  app.add_option("--fn-rate", c.fn_rate, "Simulated false-negative rate");
  app.add_option("--fp-rate", c.fp_rate, "Simulated false positives per scene");

  auto* synth = app.add_subcommand("synth", "Write a synthetic KITTI-layout dataset (train/ and val/)");
  synth->add_option("--out", c.out_dir, "Output directory");
  synth->add_option("--scenes", c.scenes, "Total scene count");
  synth->add_option("--val-fraction", c.val_fraction, "Share of scenes in val/");
  synth->add_option("--objects", c.objects, "Objects per scene");
  synth->add_option("--points-per-object", c.points_per_object, "Object points at 10 m");
  synth->add_option("--ground-density", c.ground_density, "Ground points per square meter");
  synth->add_option("--clutter-rate", c.clutter_rate, "Clutter points per square meter");

  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset split");
  train_cmd->add_option("--log", c.log, "Loss log (default: <checkpoint>.log)");
  train_cmd->add_option("--resume", c.resume, "Continue from this checkpoint");
  train_cmd->add_option("--checkpoint-every", c.checkpoint_every, "Checkpoint interval (0: end only)");
  train_cmd->add_option("--min-points", c.min_points, "Skip objects with fewer points in their region");
  train_cmd->add_option("--fixed-samples", c.fixed_samples,
                        "Generate this many samples once and cycle through them");

  auto* refine_cmd = app.add_subcommand("refine", "Refine detections into boxes");
  refine_cmd->add_option("--detections", c.detections,
                         "Directory of KITTI result files; default: simulate the localizer");
  refine_cmd->add_option("--proposals-out", c.proposals_out,
                         "Also write the unrefined proposals as anchor-size boxes");
  refine_cmd->add_option("--proposal-yaw", c.proposal_yaw, "Yaw of the written proposal boxes");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate predictions against labels");
  eval_cmd->add_option("--level", c.level, "easy, moderate, hard or all");
  eval_cmd->add_option("--iou", c.iou, "IoU threshold (default: 0.7 car, 0.5 otherwise)");
  eval_cmd->add_option("--ap-points", c.ap_points, "AP interpolation points: 40 or 11");
  eval_cmd->add_option("--report", c.report, "Text report path");
  eval_cmd->add_option("--report-json", c.report_json, "JSON report path");

  auto* sweep = app.add_subcommand("sweep-dist", "Train, refine and evaluate per dist_bound");
  sweep->add_option("--bounds", c.bounds, "dist_bound values")->delimiter(',');
  sweep->add_option("--noises", c.noises, "Localizer noise levels (default 0.15)")->delimiter(',');
  sweep->add_option("--val-data", c.val_data, "Held-out split directory");
  sweep->add_option("--work-dir", c.work_dir, "Checkpoints and predictions; matching checkpoints are reused");

  auto* bench = app.add_subcommand("bench", "Median latency of cropping and inference");
  bench->add_option("--detections", c.bench_detections, "Detections per repetition");
  bench->add_option("--reps", c.reps, "Timed repetitions");
  bench->add_option("--warmup", c.warmup, "Untimed repetitions");
  bench->add_option("--scene", c.scene_id, "Frame id (default: first)");

  for (auto* sub : {synth, train_cmd, refine_cmd, eval_cmd, sweep, bench}) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }

  const bool class_given = app.count("--class") > 0 || !app.get_option("--class")->empty();
  try {
    require_class(c.object_class);
    if (*synth) return cmd_synth(c, out);
    if (*train_cmd) return cmd_train(c, out);
    if (*refine_cmd) return cmd_refine(c, class_given, out, err);
    if (*eval_cmd) return cmd_eval(c, out);
    if (*sweep) return cmd_sweep(c, out, err);
    if (*bench) return cmd_bench(c, class_given, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace epbrm
