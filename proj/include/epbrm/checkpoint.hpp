#pragma once

// Binary checkpoint container. Layout (all integers little-endian):
//   8 bytes   magic "EPBRMCKP"
//   u32       format version (1)
//   u32       header length in bytes
//   header    UTF-8 JSON: model config, seed, iteration, tensor shapes,
//             optimizer constants, payload length
//   payload   float32 little-endian values: model tensors in
//             for_each_tensor order, then the optimizer's first moments,
//             then its second moments (Adam only)
// See docs/checkpoint.md.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "epbrm/model.hpp"
#include "epbrm/optimizer.hpp"

namespace epbrm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  EpbrmModel<float> model;
  std::optional<OptimizerState<float>> optimizer;
  std::uint64_t seed = 0;
  std::int64_t iteration = 0;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

/// Throws IoError when the file cannot be written or read, FormatError on a
/// malformed or truncated container.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace epbrm
