#pragma once

// MRC2014 subset: writes mode 2 (float32, little-endian); reads modes
// 0 (int8), 1 (int16), 2 (float32) and 6 (uint16) in either byte order.
// Extended headers are skipped.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "loctomo/geometry.hpp"
#include "loctomo/volume.hpp"

namespace loctomo {

struct MrcHeader {
  std::int32_t nx = 0, ny = 0, nz = 0;
  std::int32_t mode = 2;
  std::int32_t mx = 0, my = 0, mz = 0;
  float cell_x = 0.f, cell_y = 0.f, cell_z = 0.f;
  float dmin = 0.f, dmax = 0.f, dmean = 0.f, rms = 0.f;
  std::int32_t nsymbt = 0;  // extended header bytes
  bool big_endian = false;

  static constexpr std::size_t kSize = 1024;

  // Per-axis Angstrom/voxel from cell / sampling; 1 when undefined.
  double voxel_size() const;
  static std::size_t bytes_per_value(std::int32_t mode);
};

struct MrcData {
  MrcHeader header;
  std::vector<double> values;  // x fastest

  Dims3 dims() const { return {header.nx, header.ny, header.nz}; }
  Volume to_volume() const;
  // Sections become projections; angles must match nz.
  TiltSeries to_tilt_series(std::vector<double> angles_rad) const;
};

// Throws FormatError (unsupported mode, bad stamp, bad dims) or
// CorruptionError (truncated payload).
MrcData read_mrc(const std::filesystem::path& path);
MrcData parse_mrc(std::span<const std::uint8_t> bytes);

void write_mrc(const Volume& volume, const std::filesystem::path& path);
void write_mrc(const TiltSeries& stack, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_mrc(Dims3 dims, std::span<const double> values, double pixel_x,
                                     double pixel_y, double pixel_z);

// IMOD-style .tlt: one angle in degrees per line, blank lines ignored.
std::vector<double> read_tlt(const std::filesystem::path& path);
std::vector<double> parse_tlt(const std::string& text);
void write_tlt(std::span<const double> angles_rad, const std::filesystem::path& path);

// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace loctomo
