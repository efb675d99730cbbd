#include "loctomo/mrc.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace loctomo {

namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

template <typename T>
T load(const std::uint8_t* p, bool swap) {
  std::array<std::uint8_t, sizeof(T)> b;
  std::memcpy(b.data(), p, sizeof(T));
  if (swap) std::reverse(b.begin(), b.end());
  T v;
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

template <typename T>
void store(std::uint8_t* p, T v) {
  std::memcpy(p, &v, sizeof(T));
}

}  // namespace

double MrcHeader::voxel_size() const {
  if (mx > 0 && cell_x > 0.f) return static_cast<double>(cell_x) / mx;
  return 1.0;
}

std::size_t MrcHeader::bytes_per_value(std::int32_t mode) {
  switch (mode) {
    case 0: return 1;
    case 1: return 2;
    case 2: return 4;
    case 6: return 2;
    default: return 0;
  }
}

Volume MrcData::to_volume() const { return Volume(dims(), header.voxel_size(), values); }

TiltSeries MrcData::to_tilt_series(std::vector<double> angles_rad) const {
  if (angles_rad.size() != static_cast<std::size_t>(header.nz))
    throw InvalidArgument("angle count (" + std::to_string(angles_rad.size()) +
                          ") does not match stack sections (" + std::to_string(header.nz) + ")");
  DetectorSpec det;
  det.width = header.nx;
  det.height = header.ny;
  det.pixel_x = header.voxel_size();
  det.pixel_y = (header.my > 0 && header.cell_y > 0.f) ? static_cast<double>(header.cell_y) / header.my
                                                       : det.pixel_x;
  TiltSeries ts(det, std::move(angles_rad));
  ts.data = values;
  ts.validate();
  return ts;
}

MrcData parse_mrc(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < MrcHeader::kSize)
    throw CorruptionError("MRC file shorter than the 1024-byte header");
  const std::uint8_t* p = bytes.data();
  if (std::memcmp(p + 208, "MAP ", 4) != 0) throw FormatError("MRC map stamp 'MAP ' missing");

  MrcHeader h;
  // Machine stamp 0x44 0x4? = little endian, 0x11 0x11 = big endian.
  h.big_endian = p[212] == 0x11;
  const bool swap = h.big_endian;
  h.nx = load<std::int32_t>(p + 0, swap);
  h.ny = load<std::int32_t>(p + 4, swap);
  h.nz = load<std::int32_t>(p + 8, swap);
  h.mode = load<std::int32_t>(p + 12, swap);
  h.mx = load<std::int32_t>(p + 28, swap);
  h.my = load<std::int32_t>(p + 32, swap);
  h.mz = load<std::int32_t>(p + 36, swap);
  h.cell_x = load<float>(p + 40, swap);
  h.cell_y = load<float>(p + 44, swap);
  h.cell_z = load<float>(p + 48, swap);
  h.dmin = load<float>(p + 76, swap);
  h.dmax = load<float>(p + 80, swap);
  h.dmean = load<float>(p + 84, swap);
  h.nsymbt = load<std::int32_t>(p + 92, swap);
  h.rms = load<float>(p + 216, swap);

  if (h.nx < 1 || h.ny < 1 || h.nz < 1)
    throw FormatError("MRC dims must be >= 1, got " + std::to_string(h.nx) + "x" + std::to_string(h.ny) + "x" +
                      std::to_string(h.nz));
  const std::size_t bpv = MrcHeader::bytes_per_value(h.mode);
  if (bpv == 0) throw FormatError("unsupported MRC mode " + std::to_string(h.mode));
  if (h.nsymbt < 0) throw FormatError("negative MRC extended header size");

  // Guard the size arithmetic before allocating anything.
  const unsigned __int128 count = static_cast<unsigned __int128>(h.nx) * static_cast<unsigned>(h.ny) *
                                  static_cast<unsigned>(h.nz);
  const unsigned __int128 need = MrcHeader::kSize + static_cast<unsigned __int128>(h.nsymbt) + count * bpv;
  if (need > bytes.size())
    throw CorruptionError("MRC payload truncated: header declares more data than the file holds");

  MrcData out;
  out.header = h;
  const std::size_t n = static_cast<std::size_t>(count);
  out.values.resize(n);
  const std::uint8_t* data = p + MrcHeader::kSize + h.nsymbt;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* q = data + i * bpv;
    switch (h.mode) {
      case 0: out.values[i] = static_cast<double>(static_cast<std::int8_t>(*q)); break;
      case 1: out.values[i] = static_cast<double>(load<std::int16_t>(q, swap)); break;
      case 2: out.values[i] = static_cast<double>(load<float>(q, swap)); break;
      case 6: out.values[i] = static_cast<double>(load<std::uint16_t>(q, swap)); break;
    }
  }
  return out;
}

MrcData read_mrc(const std::filesystem::path& path) { return parse_mrc(read_file(path)); }

std::vector<std::uint8_t> encode_mrc(Dims3 dims, std::span<const double> values, double pixel_x,
                                     double pixel_y, double pixel_z) {
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) throw InvalidArgument("MRC dims must be >= 1");
  if (values.size() != dims.count()) throw InvalidArgument("MRC payload does not match dims");
  std::vector<std::uint8_t> out(MrcHeader::kSize + 4 * values.size(), 0);
  std::uint8_t* p = out.data();

  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
  std::uint8_t* body = p + MrcHeader::kSize;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float f = static_cast<float>(values[i]);
    if (!std::isfinite(f)) throw InvalidArgument("MRC writer requires finite data");
    lo = std::min(lo, static_cast<double>(f));
    hi = std::max(hi, static_cast<double>(f));
    sum += f;
    store<float>(body + 4 * i, f);
  }
  const double mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (static_cast<float>(v) - mean) * (static_cast<float>(v) - mean);

  store<std::int32_t>(p + 0, dims.nx);
  store<std::int32_t>(p + 4, dims.ny);
  store<std::int32_t>(p + 8, dims.nz);
  store<std::int32_t>(p + 12, 2);
  store<std::int32_t>(p + 28, dims.nx);
  store<std::int32_t>(p + 32, dims.ny);
  store<std::int32_t>(p + 36, dims.nz);
  store<float>(p + 40, static_cast<float>(dims.nx * pixel_x));
  store<float>(p + 44, static_cast<float>(dims.ny * pixel_y));
  store<float>(p + 48, static_cast<float>(dims.nz * pixel_z));
  store<float>(p + 52, 90.f);
  store<float>(p + 56, 90.f);
  store<float>(p + 60, 90.f);
  store<std::int32_t>(p + 64, 1);
  store<std::int32_t>(p + 68, 2);
  store<std::int32_t>(p + 72, 3);
  store<float>(p + 76, static_cast<float>(lo));
  store<float>(p + 80, static_cast<float>(hi));
  store<float>(p + 84, static_cast<float>(mean));
  std::memcpy(p + 104, "MRCO", 4);
  store<std::int32_t>(p + 108, 20140);
  std::memcpy(p + 208, "MAP ", 4);
  p[212] = 0x44;
  p[213] = 0x44;
  store<float>(p + 216, static_cast<float>(std::sqrt(var / static_cast<double>(values.size()))));
  return out;
}

void write_mrc(const Volume& volume, const std::filesystem::path& path) {
  const double v = volume.voxel_size();
  write_file_atomic(path, encode_mrc(volume.dims(), volume.data(), v, v, v));
}

void write_mrc(const TiltSeries& stack, const std::filesystem::path& path) {
  const Dims3 dims{stack.detector.width, stack.detector.height, static_cast<int>(stack.count())};
  write_file_atomic(path, encode_mrc(dims, stack.data, stack.detector.pixel_x, stack.detector.pixel_y,
                                     stack.detector.pixel_x));
}

std::vector<double> parse_tlt(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    const char* first = line.data() + b;
    const char* last = line.data() + e + 1;
    if (*first == '+') ++first;
    double deg = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, deg);
    if (ec != std::errc() || ptr != last || !std::isfinite(deg))
      throw FormatError("tilt file line " + std::to_string(line_no) + ": not a number: '" +
                        line.substr(b, e - b + 1) + "'");
    out.push_back(deg * std::numbers::pi / 180.0);
  }
  return out;
}

std::vector<double> read_tlt(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_tlt(std::string(bytes.begin(), bytes.end()));
}

void write_tlt(std::span<const double> angles_rad, const std::filesystem::path& path) {
  std::string text;
  for (double a : angles_rad) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), a * 180.0 / std::numbers::pi);
    text.append(buf, res.ptr);
    text.push_back('\n');
  }
  write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                        text.size()));
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed for '" + path.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace loctomo
