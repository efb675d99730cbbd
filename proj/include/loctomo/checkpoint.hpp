#pragma once

// Binary layout (little-endian):
//   "LCTMCKPT"            8 bytes
//   u32 version           currently 1
//   u32 n, n bytes        config block, `key = value` lines
//   u32 tensor count
//   per tensor: u32 rows, u32 cols, rows*cols f32 (column-major)
// Parameters are rounded to float32 on save.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "loctomo/fbp.hpp"
#include "loctomo/net.hpp"
#include "loctomo/train.hpp"

namespace loctomo {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  SliceMlpParams params;
  ReconMode mode = ReconMode::pixel;
  std::string wavelet = "bior2.2";
  double patch_spacing = 1.0;
  FilterSpec filter;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
// FormatError on bad magic / version / config; CorruptionError on truncation,
// shape-chain mismatch or trailing bytes.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace loctomo
