#include "loctomo/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

#include "loctomo/config.hpp"
#include "loctomo/errors.hpp"
#include "loctomo/mrc.hpp"

namespace loctomo {

namespace {

constexpr char kMagic[8] = {'L', 'C', 'T', 'M', 'C', 'K', 'P', 'T'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  std::uint8_t b[4];
  std::memcpy(b, &v, 4);
  out.insert(out.end(), b, b + 4);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw CorruptionError(std::string("checkpoint truncated in ") + what);
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    std::memcpy(&v, take(4, what), 4);
    return v;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string fmt17(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

std::string config_block(const Checkpoint& c) {
  const NetConfig& n = c.params.config();
  std::ostringstream s;
  s << "patch_size = " << n.patch_size << '\n'
    << "feature_dim = " << n.feature_dim << '\n'
    << "hidden = " << n.hidden << '\n'
    << "depth = " << n.depth << '\n'
    << "pe_dim = " << n.pe_dim << '\n'
    << "out_dim = " << n.out_dim << '\n'
    << "pe_scale = " << fmt17(n.pe_scale) << '\n'
    << "pooling = " << to_string(n.pooling) << '\n'
    << "mode = " << to_string(c.mode) << '\n'
    << "wavelet = " << c.wavelet << '\n'
    << "patch_spacing = " << fmt17(c.patch_spacing) << '\n'
    << "filter = " << to_string(c.filter.window) << '\n'
    << "pad_factor = " << c.filter.pad_factor << '\n';
  return s.str();
}

std::map<std::string, std::string> parse_block(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw FormatError("checkpoint config line malformed: '" + line + "'");
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

template <typename T>
T field_num(const std::map<std::string, std::string>& m, const std::string& key) {
  const auto it = m.find(key);
  if (it == m.end()) throw FormatError("checkpoint config lacks '" + key + "'");
  T v{};
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw FormatError("checkpoint config '" + key + "' is not a number");
  return v;
}

const std::string& field(const std::map<std::string, std::string>& m, const std::string& key) {
  const auto it = m.find(key);
  if (it == m.end()) throw FormatError("checkpoint config lacks '" + key + "'");
  return it->second;
}

// Stored size implied by a config, computed wide so absurd headers cannot
// overflow or trigger huge allocations.
long double implied_bytes(const NetConfig& n) {
  const long double p = n.patch_size, f = n.feature_dim, h = n.hidden, d = n.depth, e = n.pe_dim;
  const long double mlp_hidden = d * h * h;
  const long double per_slice = e * p + h * e + mlp_hidden + f * h;
  const long double combiner = h * p * f + mlp_hidden + n.out_dim * h;
  const long double tensors = p * (1 + d + 2) + (d + 2);
  return 4.0L * (p * per_slice + combiner) + 8.0L * tensors + 4.0L;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put_u32(out, kCheckpointVersion);
  const std::string block = config_block(ckpt);
  put_u32(out, static_cast<std::uint32_t>(block.size()));
  out.insert(out.end(), block.begin(), block.end());
  const auto& tensors = ckpt.params.tensors();
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  const auto values = ckpt.params.values();
  for (const auto& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.rows));
    put_u32(out, static_cast<std::uint32_t>(t.cols));
    for (std::size_t i = 0; i < t.size(); ++i) {
      const float f = static_cast<float>(values[t.offset + i]);
      if (!std::isfinite(f)) throw InvalidArgument("checkpoint parameters must be finite (tensor " + t.name + ")");
      std::uint8_t b[4];
      std::memcpy(b, &f, 4);
      out.insert(out.end(), b, b + 4);
    }
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  static_assert(std::endian::native == std::endian::little);
  Reader r(bytes);
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw FormatError("not a checkpoint file (bad magic)");
  r.take(8, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  const std::uint32_t block_len = r.u32("config length");
  const auto* block = r.take(block_len, "config block");
  const auto fields = parse_block(std::string(reinterpret_cast<const char*>(block), block_len));

  NetConfig net;
  Checkpoint c;
  try {
    net.patch_size = field_num<int>(fields, "patch_size");
    net.feature_dim = field_num<int>(fields, "feature_dim");
    net.hidden = field_num<int>(fields, "hidden");
    net.depth = field_num<int>(fields, "depth");
    net.pe_dim = field_num<int>(fields, "pe_dim");
    net.out_dim = field_num<int>(fields, "out_dim");
    net.pe_scale = field_num<double>(fields, "pe_scale");
    net.pooling = parse_pooling(field(fields, "pooling"));
    net.validate();
    c.mode = parse_mode(field(fields, "mode"));
    c.wavelet = field(fields, "wavelet");
    c.patch_spacing = field_num<double>(fields, "patch_spacing");
    c.filter.window = parse_filter(field(fields, "filter"));
    c.filter.pad_factor = field_num<int>(fields, "pad_factor");
    c.filter.validate();
  } catch (const FormatError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("checkpoint config invalid: ") + e.what());
  }
  if ((c.mode == ReconMode::wavelet) != (net.out_dim == 8))
    throw FormatError("checkpoint mode does not match its output width");

  if (implied_bytes(net) > static_cast<long double>(r.remaining()))
    throw CorruptionError("checkpoint truncated: config implies more parameters than the file holds");
  c.params = SliceMlpParams(net);
  const auto& tensors = c.params.tensors();
  const std::uint32_t count = r.u32("tensor count");
  if (count != tensors.size())
    throw CorruptionError("checkpoint holds " + std::to_string(count) + " tensors, config implies " +
                          std::to_string(tensors.size()));
  auto values = c.params.values();
  for (const auto& t : tensors) {
    const std::uint32_t rows = r.u32("tensor shape");
    const std::uint32_t cols = r.u32("tensor shape");
    if (rows != static_cast<std::uint32_t>(t.rows) || cols != static_cast<std::uint32_t>(t.cols))
      throw CorruptionError("shape chain broken at " + t.name + ": stored " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", expected " + std::to_string(t.rows) + "x" +
                            std::to_string(t.cols));
    const auto* p = r.take(4 * t.size(), "tensor data");
    for (std::size_t i = 0; i < t.size(); ++i) {
      float f;
      std::memcpy(&f, p + 4 * i, 4);
      if (!std::isfinite(f)) throw CorruptionError("non-finite value in tensor " + t.name);
      values[t.offset + i] = f;
    }
  }
  if (r.remaining() != 0) throw CorruptionError("trailing bytes after the last tensor");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace loctomo
