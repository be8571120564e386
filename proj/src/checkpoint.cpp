#include "epbrm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "epbrm/errors.hpp"
#include "json.hpp"

namespace epbrm {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'E', 'P', 'B', 'R', 'M', 'C', 'K', 'P'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)]))
         << (8 * i);
  }
  return v;
}

void put_floats(std::string& out, const float* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) put_u32(out, std::bit_cast<std::uint32_t>(data[i]));
}

json config_to_json(const ModelConfig& c) {
  return {{"class", std::string(class_name(c.object_class))},
          {"dist_bound", c.dist_bound},
          {"rotation_bins", c.rotation_bins},
          {"n_points", c.n_points},
          {"mechanisms", format_mechanisms(c.mechanisms)},
          {"point_widths", c.point_widths},
          {"head_widths", c.head_widths}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.object_class = require_class(j.at("class").get<std::string>());
  c.dist_bound = j.at("dist_bound").get<double>();
  c.rotation_bins = j.at("rotation_bins").get<int>();
  c.n_points = j.at("n_points").get<int>();
  c.mechanisms = parse_mechanisms(j.at("mechanisms").get<std::string>());
  c.point_widths = j.at("point_widths").get<std::vector<int>>();
  c.head_widths = j.at("head_widths").get<std::vector<int>>();
  c.validate();
  return c;
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes_of(const EpbrmModel<float>& m) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  m.for_each_tensor([&out](Eigen::Map<const Matrix<float>> t) { out.emplace_back(t.rows(), t.cols()); });
  return out;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  json header;
  header["config"] = config_to_json(ckpt.model.config);
  header["seed"] = ckpt.seed;
  header["iteration"] = ckpt.iteration;
  json shapes = json::array();
  std::size_t count = 0;
  for (auto [r, c] : shapes_of(ckpt.model)) {
    shapes.push_back({r, c});
    count += static_cast<std::size_t>(r * c);
  }
  header["tensors"] = shapes;
  if (ckpt.optimizer) {
    const auto& o = *ckpt.optimizer;
    header["optimizer"] = {{"kind", std::string(optimizer_name(o.kind))},
                           {"learning_rate", o.learning_rate},
                           {"beta1", o.beta1},
                           {"beta2", o.beta2},
                           {"epsilon", o.epsilon},
                           {"step", o.step}};
    count *= o.kind == OptimizerKind::kAdam ? 3 : 2;
  }
  header["payload_floats"] = count;

  const std::string text = header.dump();
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + 4 * count);
  ckpt.model.for_each_tensor([&out](Eigen::Map<const Matrix<float>> t) {
    put_floats(out, t.data(), static_cast<std::size_t>(t.size()));
  });
  if (ckpt.optimizer) {
    for (const auto& m : ckpt.optimizer->first_moment) put_floats(out, m.data(), static_cast<std::size_t>(m.size()));
    for (const auto& m : ckpt.optimizer->second_moment) put_floats(out, m.data(), static_cast<std::size_t>(m.size()));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("not an epBRM checkpoint (bad magic)");
  }
  const std::uint32_t version = get_u32(bytes, 8);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::size_t header_len = get_u32(bytes, 12);
  if (bytes.size() < 16 + header_len) throw FormatError("checkpoint header is truncated");

  Checkpoint ckpt;
  json header;
  try {
    header = json::parse(bytes.substr(16, header_len));
    ckpt.model = EpbrmModel<float>::init(config_from_json(header.at("config")), 0);
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.iteration = header.at("iteration").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }

  std::vector<std::pair<Eigen::Index, Eigen::Index>> stored;
  for (const auto& s : header.at("tensors")) stored.emplace_back(s.at(0).get<Eigen::Index>(), s.at(1).get<Eigen::Index>());
  if (stored != shapes_of(ckpt.model)) {
    throw FormatError("checkpoint tensor shapes do not match its model config");
  }

  const std::size_t floats = header.at("payload_floats").get<std::size_t>();
  std::size_t at = 16 + header_len;
  if (bytes.size() != at + 4 * floats) {
    throw FormatError("checkpoint payload has " + std::to_string(bytes.size() - at) +
                      " bytes, header declares " + std::to_string(4 * floats));
  }
  auto read_into = [&](float* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i, at += 4) data[i] = std::bit_cast<float>(get_u32(bytes, at));
  };
  ckpt.model.for_each_tensor([&](Eigen::Map<Matrix<float>> t) { read_into(t.data(), t.size()); });

  if (header.contains("optimizer")) {
    const json& o = header["optimizer"];
    auto state = make_optimizer<float>(ckpt.model, parse_optimizer(o.at("kind").get<std::string>()),
                                       o.at("learning_rate").get<double>());
    state.beta1 = o.at("beta1").get<double>();
    state.beta2 = o.at("beta2").get<double>();
    state.epsilon = o.at("epsilon").get<double>();
    state.step = o.at("step").get<std::int64_t>();
    for (auto& m : state.first_moment) read_into(m.data(), m.size());
    for (auto& m : state.second_moment) read_into(m.data(), m.size());
    ckpt.optimizer = std::move(state);
  }
  if (at != bytes.size()) throw FormatError("checkpoint payload length mismatch");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write checkpoint " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot write checkpoint " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace epbrm
