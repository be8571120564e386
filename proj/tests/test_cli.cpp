#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "epbrm/checkpoint.hpp"
#include "epbrm/cli.hpp"
#include "epbrm/kitti.hpp"

using namespace epbrm;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("epbrm_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return files;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

std::vector<std::string> header_of(const fs::path& log) {
  std::ifstream in(log);
  std::string line;
  std::getline(in, line);
  std::istringstream f(line);
  std::vector<std::string> cols;
  for (std::string c; f >> c;) cols.push_back(c);
  return cols;
}

double metric(const std::string& report, const std::string& name) {
  std::istringstream lines(report);
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream f(line);
    std::string m, cls, level;
    double thr, v;
    if (f >> m >> cls >> level >> thr >> v && m == name) return v;
  }
  FAIL("metric " << name << " missing from report");
  return -1;
}

double bench_total(const std::string& out) {
  double total = 0;
  std::istringstream lines(out);
  std::string key;
  double v;
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream f(line);
    if (f >> key >> v && (key == "crop_resample_ms" || key == "inference_ms")) total += v;
  }
  return total;
}

const std::vector<std::string> kSmallTrain{"--iters", "3", "--batch", "4", "--n-points", "64",
                                           "--threads", "1"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("synth") {
  TempDir dir("synth");
  const auto a = dir.path / "a", b = dir.path / "b", c = dir.path / "c";
  REQUIRE(run({"synth", "--out", a.string(), "--scenes", "10", "--seed", "7"}).code == 0);
  REQUIRE(run({"synth", "--out", b.string(), "--scenes", "10", "--seed", "7"}).code == 0);
  REQUIRE(run({"synth", "--out", c.string(), "--scenes", "10", "--seed", "8"}).code == 0);
  const auto ta = tree(a);
  CHECK(ta.size() == 30);
  CHECK(ta.count("train/velodyne/000000.bin") == 1);
  CHECK(ta.count("val/label/000001.txt") == 1);
  CHECK(ta == tree(b));
  CHECK(ta != tree(c));

  SUBCASE("existing output needs --force") {
    const Result again = run({"synth", "--out", a.string(), "--scenes", "10", "--seed", "8"});
    CHECK(again.code != 0);
    CHECK(again.err.find("--force") != std::string::npos);
    CHECK(tree(a) == tree(b));
    CHECK(run({"synth", "--out", a.string(), "--scenes", "10", "--seed", "8", "--force"}).code == 0);
    CHECK(tree(a) == tree(c));
  }
  SUBCASE("zero objects gives empty labels") {
    const auto z = dir.path / "z";
    REQUIRE(run({"synth", "--out", z.string(), "--scenes", "3", "--objects", "0"}).code == 0);
    for (const auto& [name, bytes] : tree(z)) {
      if (name.find("label") != std::string::npos) CHECK(bytes.empty());
    }
  }
  SUBCASE("bad arguments") {
    const Result bad = run({"synth", "--out", (dir.path / "x").string(), "--class", "truck"});
    CHECK(bad.code != 0);
    CHECK(bad.err.find("truck") != std::string::npos);
    CHECK(run({"synth", "--out", (dir.path / "x").string(), "--scenes", "abc"}).code == 2);
    CHECK(run({"synth"}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
  }
}

TEST_CASE("train, refine and eval") {
  TempDir dir("pipeline");
  const auto data = dir.path / "data";
  REQUIRE(run({"synth", "--out", data.string(), "--scenes", "6", "--val-fraction", "0.34",
               "--objects", "4", "--seed", "3"})
              .code == 0);
  const std::string train_dir = (data / "train").string();
  const std::string val_dir = (data / "val").string();
  const auto ckpt = dir.path / "m.ckpt";

  SUBCASE("log columns follow the mechanisms") {
    const auto c1 = dir.path / "c.ckpt", c2 = dir.path / "t.ckpt";
    REQUIRE(run(with({"train", "--data", train_dir, "--checkpoint", c1.string(), "--mechanisms",
                      "center"},
                     kSmallTrain))
                .code == 0);
    REQUIRE(run(with({"train", "--data", train_dir, "--checkpoint", c2.string(), "--mechanisms",
                      "translation"},
                     kSmallTrain))
                .code == 0);
    const auto h1 = header_of(c1.string() + ".log"), h2 = header_of(c2.string() + ".log");
    CHECK(h1 == std::vector<std::string>{"iter", "total", "loc", "rot_cls", "rot_reg", "size",
                                         "loc_center"});
    CHECK(h2 == std::vector<std::string>{"iter", "total", "loc", "rot_cls", "rot_reg", "size"});
    CHECK(line_count(c1.string() + ".log") == 4);
  }
  SUBCASE("training twice with one seed writes identical checkpoints") {
    const auto c1 = dir.path / "a.ckpt", c2 = dir.path / "b.ckpt", c3 = dir.path / "c.ckpt";
    REQUIRE(run(with({"train", "--data", train_dir, "--checkpoint", c1.string(), "--seed", "4"},
                     kSmallTrain))
                .code == 0);
    REQUIRE(run({"train", "--data", train_dir, "--checkpoint", c2.string(), "--seed", "4",
                 "--threads", "2", "--iters", "3", "--batch", "4", "--n-points", "64"})
                .code == 0);
    REQUIRE(run(with({"train", "--data", train_dir, "--checkpoint", c3.string(), "--seed", "5"},
                     kSmallTrain))
                .code == 0);
    CHECK(read_file(c1) == read_file(c2));
    CHECK(read_file(c1) != read_file(c3));
  }
  SUBCASE("resume appends the same log lines") {
    const auto full = dir.path / "full.ckpt", part = dir.path / "part.ckpt";
    const std::vector<std::string> base{"--batch", "4", "--n-points", "64", "--seed", "2"};
    REQUIRE(run(with({"train", "--data", train_dir, "--checkpoint", full.string(), "--iters", "6"},
                     base))
                .code == 0);
    REQUIRE(run(with({"train", "--data", train_dir, "--checkpoint", part.string(), "--iters", "4"},
                     base))
                .code == 0);
    REQUIRE(run(with({"train", "--data", train_dir, "--checkpoint", part.string(), "--iters", "6",
                      "--resume", part.string()},
                     base))
                .code == 0);
    CHECK(read_file(full.string() + ".log") == read_file(part.string() + ".log"));
    CHECK(read_file(full) == read_file(part));
  }
  SUBCASE("config file with command-line overrides") {
    const auto cfg = dir.path / "run.ini";
    std::ofstream(cfg) << "seed = 4\niters = 2\nbatch = 4\nn-points = 64\nmechanisms = translation\n";
    const auto c1 = dir.path / "f.ckpt";
    REQUIRE(run({"--config", cfg.string(), "train", "--data", train_dir, "--checkpoint",
                 c1.string(), "--iters", "3"})
                .code == 0);
    const Checkpoint loaded = load_checkpoint(c1);
    CHECK(loaded.iteration == 3);
    CHECK(loaded.seed == 4);
    CHECK(loaded.model.config.n_points == 64);
    CHECK(loaded.model.config.mechanisms == std::vector<Mechanism>{Mechanism::kTranslation});
  }
  SUBCASE("train errors") {
    CHECK(run({"train", "--data", train_dir}).code == 2);
    CHECK(run(with({"train", "--data", (dir.path / "nowhere").string(), "--checkpoint",
                    ckpt.string()},
                   kSmallTrain))
              .code == 1);
    CHECK(run(with({"train", "--data", train_dir, "--checkpoint", "/nonexistent/dir/m.ckpt"},
                   kSmallTrain))
              .code == 1);
    const auto empty = dir.path / "empty";
    REQUIRE(run({"synth", "--out", empty.string(), "--scenes", "2", "--objects", "0"}).code == 0);
    const Result r = run(with({"train", "--data", (empty / "train").string(), "--checkpoint",
                               ckpt.string()},
                              kSmallTrain));
    CHECK(r.code == 1);
    CHECK(r.err.find("no usable") != std::string::npos);
    CHECK(run(with({"train", "--data", train_dir, "--checkpoint", ckpt.string(), "--mechanisms",
                    "warp"},
                   kSmallTrain))
              .code == 2);
  }
  SUBCASE("refine with an untrained model keeps every detection") {
    ModelConfig mc;
    mc.n_points = 64;
    save_checkpoint(ckpt, Checkpoint{EpbrmModel<float>::init(mc, 1), std::nullopt, 1, 0});
    const auto pred = dir.path / "pred";
    const Result r = run({"refine", "--data", val_dir, "--checkpoint", ckpt.string(), "--pred",
                          pred.string(), "--noise", "0"});
    REQUIRE(r.code == 0);
    const DatasetLayout layout{val_dir};
    for (const auto& id : layout.ids()) {
      CHECK(line_count(pred / (id + ".txt")) == line_count(layout.label(id)));
    }
    const Result again = run({"refine", "--data", val_dir, "--checkpoint", ckpt.string(), "--pred",
                              (dir.path / "pred2").string(), "--noise", "0"});
    REQUIRE(again.code == 0);
    CHECK(tree(pred) == tree(dir.path / "pred2"));

    const Result wrong = run({"refine", "--data", val_dir, "--checkpoint", ckpt.string(), "--pred",
                              pred.string(), "--class", "pedestrian"});
    CHECK(wrong.code == 1);
    CHECK(wrong.err.find("Car") != std::string::npos);
  }
  SUBCASE("refine without a checkpoint") {
    const Result r = run({"refine", "--data", val_dir, "--checkpoint",
                          (dir.path / "missing.ckpt").string(), "--pred",
                          (dir.path / "p").string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("missing.ckpt") != std::string::npos);
  }
  SUBCASE("eval") {
    const DatasetLayout layout{val_dir};
    const auto gt_pred = dir.path / "gt_pred";
    fs::create_directories(gt_pred);
    for (const auto& id : layout.ids()) {
      const Calibration calib = read_calibration(layout.calib(id));
      std::vector<Detection> dets;
      for (const auto& g : read_labels(layout.label(id), calib)) {
        Detection d;
        d.box = g.box;
        d.location = g.box.center;
        d.score = 1.0;
        dets.push_back(d);
      }
      write_predictions(gt_pred / (id + ".txt"), dets, calib, ObjectClass::kCar, {1.5, 1.6, 3.9});
    }
    const auto report = dir.path / "report.txt";
    const Result r = run({"eval", "--data", val_dir, "--pred", gt_pred.string(), "--report",
                          report.string(), "--report-json", (dir.path / "r.json").string(),
                          "--level", "all"});
    REQUIRE(r.code == 0);
    CHECK(metric(r.out, "ratio") == 1.0);
    CHECK(metric(r.out, "ap40") == 1.0);
    CHECK(metric(r.out, "max_recall") == 1.0);
    CHECK(read_file(report) == r.out);

    const Result moderate = run({"eval", "--data", val_dir, "--pred", gt_pred.string()});
    REQUIRE(moderate.code == 0);
    const Result repeat = run({"eval", "--data", val_dir, "--pred", gt_pred.string()});
    CHECK(moderate.out == repeat.out);

    const auto none = dir.path / "none";
    fs::create_directories(none);
    const Result empty = run({"eval", "--data", val_dir, "--pred", none.string()});
    REQUIRE(empty.code == 0);
    CHECK(metric(empty.out, "ratio") == 0.0);
    CHECK(metric(empty.out, "ap40") == 0.0);
    CHECK(metric(empty.out, "max_recall") == 0.0);

    CHECK(run({"eval", "--data", val_dir, "--pred", none.string(), "--level", "medium"}).code == 2);
    CHECK(run({"eval", "--data", val_dir, "--pred", none.string(), "--ap-points", "20"}).code == 2);
  }
  SUBCASE("sweep-dist") {
    const auto work = dir.path / "sweep";
    CHECK(run({"sweep-dist", "--data", train_dir, "--val-data", val_dir, "--work-dir",
               work.string()})
              .code == 2);
    const std::vector<std::string> args =
        with({"sweep-dist", "--data", train_dir, "--val-data", val_dir, "--work-dir",
              work.string(), "--bounds", "0.2", "--noises", "0.1"},
             kSmallTrain);
    const Result r = run(args);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(work / "dist_0.200.ckpt"));
    std::istringstream lines(r.out);
    std::string header, row, extra;
    std::getline(lines, header);
    std::getline(lines, row);
    CHECK(header == "dist_bound noise ratio ap40 max_recall");
    CHECK(row.rfind("0.200 0.100 ", 0) == 0);
    CHECK(!std::getline(lines, extra));
    const Result reuse = run(args);
    CHECK(reuse.err.find("reusing") != std::string::npos);
    CHECK(reuse.out == r.out);
  }
  SUBCASE("bench") {
    ModelConfig mc;
    mc.mechanisms = {Mechanism::kCentering};
    save_checkpoint(ckpt, Checkpoint{EpbrmModel<float>::init(mc, 1), std::nullopt, 1, 0});
    const std::vector<std::string> base{"bench", "--data", val_dir, "--checkpoint", ckpt.string(),
                                        "--reps", "15", "--warmup", "3"};
    const Result r20 = run(with(base, {"--detections", "20"}));
    REQUIRE(r20.code == 0);
    CHECK(r20.out.find("detections 20 ") != std::string::npos);
    CHECK(r20.out.find("crop_resample_ms ") != std::string::npos);
    CHECK(r20.out.find("inference_ms ") != std::string::npos);
    CHECK(r20.out.find("6.5 ms") != std::string::npos);
    const Result r40 = run(with(base, {"--detections", "40"}));
    REQUIRE(r40.code == 0);
    const double ratio = bench_total(r40.out) / bench_total(r20.out);
    MESSAGE("bench scaling " << ratio);
    CHECK(ratio > 2.0 / 2.5);
    CHECK(ratio < 2.0 * 2.5);
    CHECK(run(with(base, {"--detections", "0"})).code == 2);
  }
}
