#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "loctomo/checkpoint.hpp"
#include "loctomo/config.hpp"
#include "loctomo/errors.hpp"
#include "loctomo/mrc.hpp"

using namespace loctomo;

namespace {

// Hand-built MRC file: 1024-byte header, optional extended header, payload.
class RawMrc {
 public:
  RawMrc(int nx, int ny, int nz, int mode, bool big_endian = false, int ext = 0)
      : big_(big_endian), bytes_(1024 + static_cast<std::size_t>(ext), 0) {
    put_i32(0, nx);
    put_i32(4, ny);
    put_i32(8, nz);
    put_i32(12, mode);
    put_i32(28, nx);
    put_i32(32, ny);
    put_i32(36, nz);
    put_f32(40, static_cast<float>(nx));
    put_f32(44, static_cast<float>(ny));
    put_f32(48, static_cast<float>(nz));
    put_i32(92, ext);
    std::memcpy(bytes_.data() + 208, "MAP ", 4);
    bytes_[212] = big_endian ? 0x11 : 0x44;
    bytes_[213] = big_endian ? 0x11 : 0x44;
  }

  template <class T>
  void push(T value) {
    auto raw = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
    if (big_) std::reverse(raw.begin(), raw.end());
    bytes_.insert(bytes_.end(), raw.begin(), raw.end());
  }

  void put_i32(std::size_t at, std::int32_t v) { put(at, std::bit_cast<std::array<std::uint8_t, 4>>(v)); }
  void put_f32(std::size_t at, float v) { put(at, std::bit_cast<std::array<std::uint8_t, 4>>(v)); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  void put(std::size_t at, std::array<std::uint8_t, 4> raw) {
    if (big_) std::reverse(raw.begin(), raw.end());
    std::memcpy(bytes_.data() + at, raw.data(), 4);
  }

  bool big_;
  std::vector<std::uint8_t> bytes_;
};

Volume float_volume(Dims3 d, std::uint64_t seed, double voxel = 1.0) {
  Volume v = testing::random_volume(d, seed, voxel);
  for (double& x : v.data()) x = static_cast<float>(x);
  return v;
}

Checkpoint sample_checkpoint(int out_dim) {
  NetConfig c;
  c.patch_size = 5;
  c.feature_dim = 4;
  c.hidden = 6;
  c.depth = 1;
  c.pe_dim = 8;
  c.out_dim = out_dim;
  Checkpoint ck;
  ck.params = SliceMlpParams(c);
  ck.params.init_kaiming(17);
  for (double& x : ck.params.values()) x = static_cast<float>(x);
  ck.mode = out_dim == 8 ? ReconMode::wavelet : ReconMode::pixel;
  return ck;
}

void write_text(const std::filesystem::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST_CASE("MRC volume round trip is bit-exact") {
  testing::TempDir dir("mrc");
  for (const Dims3 d : {Dims3{17, 9, 5}, Dims3{1, 1, 1}}) {
    const Volume v = float_volume(d, 1, 2.25);
    write_mrc(v, dir / "v.mrc");
    CHECK(std::filesystem::file_size(dir / "v.mrc") == 1024 + 4 * d.count());
    const MrcData back = read_mrc(dir / "v.mrc");
    CHECK(back.dims() == d);
    CHECK(back.header.mode == 2);
    CHECK(back.header.voxel_size() == doctest::Approx(2.25));
    CHECK(std::equal(back.values.begin(), back.values.end(), v.data().begin(), v.data().end()));
    const Volume again = back.to_volume();
    CHECK(again.voxel_size() == doctest::Approx(2.25));
    float mx = -1e30f;
    for (double x : v.data()) mx = std::max(mx, static_cast<float>(x));
    CHECK(back.header.dmax == mx);
  }
}

TEST_CASE("MRC tilt stacks carry angles from the caller") {
  testing::TempDir dir("stack");
  DetectorSpec det;
  det.width = 6;
  det.height = 4;
  TiltSeries ts(det, std::vector<double>{-0.1, 0.0, 0.1});
  for (std::size_t i = 0; i < ts.data.size(); ++i) ts.data[i] = static_cast<float>(0.5 * static_cast<double>(i));
  write_mrc(ts, dir / "s.mrc");
  const MrcData back = read_mrc(dir / "s.mrc");
  CHECK(back.dims() == Dims3{6, 4, 3});
  const TiltSeries t = back.to_tilt_series(ts.angles);
  CHECK(t.data == ts.data);
  CHECK_THROWS_AS(back.to_tilt_series({0.0, 0.1}), InvalidArgument);
}

TEST_CASE("MRC reads modes 0, 1 and 6 and big-endian files") {
  RawMrc m0(2, 2, 1, 0);
  for (const std::int8_t v : {-3, 0, 5, 127}) m0.push(v);
  CHECK(parse_mrc(m0.bytes()).values == std::vector<double>{-3, 0, 5, 127});

  RawMrc m1(2, 1, 1, 1);
  m1.push<std::int16_t>(-300);
  m1.push<std::int16_t>(1200);
  CHECK(parse_mrc(m1.bytes()).values == std::vector<double>{-300, 1200});

  RawMrc m6(1, 2, 1, 6);
  m6.push<std::uint16_t>(65535);
  m6.push<std::uint16_t>(7);
  CHECK(parse_mrc(m6.bytes()).values == std::vector<double>{65535, 7});

  RawMrc be(3, 1, 1, 2, true, 64);
  be.bytes().resize(1024 + 64, 0xAB);
  for (const float v : {1.5f, -2.0f, 0.25f}) be.push(v);
  const MrcData d = parse_mrc(be.bytes());
  CHECK(d.header.big_endian);
  CHECK(d.values == std::vector<double>{1.5, -2.0, 0.25});
}

TEST_CASE("MRC rejects malformed inputs with typed errors") {
  RawMrc mode3(2, 2, 2, 3);
  mode3.bytes().resize(1024 + 2 * 2 * 2 * 4);
  CHECK_THROWS_AS(parse_mrc(mode3.bytes()), FormatError);

  RawMrc trunc(4, 4, 4, 2);
  trunc.bytes().resize(1024 + 4 * 63);
  CHECK_THROWS_AS(parse_mrc(trunc.bytes()), CorruptionError);

  RawMrc stamp(1, 1, 1, 2);
  stamp.push(1.0f);
  std::memcpy(stamp.bytes().data() + 208, "PAM ", 4);
  CHECK_THROWS_AS(parse_mrc(stamp.bytes()), FormatError);

  RawMrc zero(0, 1, 1, 2);
  CHECK_THROWS_AS(parse_mrc(zero.bytes()), FormatError);
  CHECK_THROWS_AS(parse_mrc(std::vector<std::uint8_t>(100, 0)), Error);
  CHECK_THROWS_AS(read_mrc("/nonexistent/x.mrc"), IoError);
}

TEST_CASE("MRC header fuzz corpus maps to parses or typed errors") {
  const Volume v = float_volume(Dims3{6, 5, 4}, 2);
  const auto seed = encode_mrc(v.dims(), v.data(), 1.0, 1.0, 1.0);
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> where(0, 1023);
  std::uniform_int_distribution<int> byte(0, 255);
  const std::int32_t extreme[] = {0, -1, 1, 0x7fffffff, static_cast<std::int32_t>(0x80000000), 3, 6, 1 << 20};
  int typed = 0, parsed = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::uint8_t> m = seed;
    if (i % 3 == 0) {
      for (int f = 0; f < 1 + i % 7; ++f) m[where(rng)] = static_cast<std::uint8_t>(byte(rng));
    } else if (i % 3 == 1) {
      // Header int fields: dims, mode, sampling, nsymbt.
      const std::size_t fields[] = {0, 4, 8, 12, 28, 32, 36, 92};
      const std::int32_t val = extreme[static_cast<std::size_t>(i) % 8];
      std::memcpy(m.data() + fields[static_cast<std::size_t>(i / 3) % 8], &val, 4);
    } else {
      m.resize(std::uniform_int_distribution<std::size_t>(0, m.size() - 1)(rng));
    }
    try {
      parse_mrc(m);
      ++parsed;
    } catch (const Error&) {
      ++typed;
    }
  }
  CHECK(typed + parsed == 1000);
  CHECK(typed > 0);
}

TEST_CASE("tilt angle files") {
  const auto a = parse_tlt("0\n3\n-3\n");
  REQUIRE(a.size() == 3);
  CHECK(a[1] == doctest::Approx(0.05236).epsilon(1e-4));
  CHECK(a[2] == doctest::Approx(-0.05236).epsilon(1e-4));
  CHECK(parse_tlt("\n 1.5 \n\n").size() == 1);

  std::string text;
  for (int deg = -60; deg <= 60; deg += 3) text += std::to_string(deg) + "\n";
  CHECK(parse_tlt(text).size() == 41);

  try {
    parse_tlt("abc\n");
    FAIL("expected a parse error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_tlt("1\n2x\n"), FormatError);

  testing::TempDir dir("tlt");
  const std::vector<double> angles{-1.0, 0.0, 0.5};
  write_tlt(angles, dir / "a.tlt");
  const auto back = read_tlt(dir / "a.tlt");
  for (std::size_t i = 0; i < 3; ++i) CHECK(back[i] == doctest::Approx(angles[i]).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  testing::TempDir dir("ckpt");
  for (const int out : {1, 8}) {
    const Checkpoint ck = sample_checkpoint(out);
    save_checkpoint(ck, dir / "m.ckpt");
    const Checkpoint back = load_checkpoint(dir / "m.ckpt");
    CHECK(back.params.config() == ck.params.config());
    CHECK(back.mode == ck.mode);
    const PatchStack probe = testing::random_stack(5, 9, 3);
    CHECK(slice_mlp_forward(back.params, probe) == slice_mlp_forward(ck.params, probe));
    CHECK(encode_checkpoint(back) == encode_checkpoint(ck));
  }
}

TEST_CASE("checkpoint corruption") {
  const auto bytes = encode_checkpoint(sample_checkpoint(1));
  std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 7);
  CHECK_THROWS_AS(decode_checkpoint(cut), CorruptionError);
  std::vector<std::uint8_t> magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(magic), FormatError);
  std::vector<std::uint8_t> version = bytes;
  version[8] = 9;
  CHECK_THROWS_AS(decode_checkpoint(version), FormatError);
  std::vector<std::uint8_t> trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(trailing), CorruptionError);

  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    std::vector<std::uint8_t> m = bytes;
    m[std::uniform_int_distribution<std::size_t>(0, m.size() - 1)(rng)] ^= static_cast<std::uint8_t>(1 + i % 255);
    try {
      decode_checkpoint(m);
    } catch (const Error&) {
    }
  }
}

TEST_CASE("config defaults and errors") {
  const RunConfig d = parse_config_text("");
  CHECK(d.patch_size == 21);
  CHECK(d.hidden == 128);
  CHECK(d.depth == 5);
  CHECK(d.filter == FilterWindow::cosine_ramp);
  CHECK(d.tilt_drop_max == 30);

  const RunConfig c = parse_config_text("# comment\nseed = 7\nfilter = ramp  # inline\nn2n = false\nmode = wavelet\n");
  CHECK(c.seed == 7);
  CHECK(c.filter == FilterWindow::ramp);
  CHECK_FALSE(c.n2n);
  CHECK(c.net_config().out_dim == 8);

  CHECK_THROWS_AS(parse_config_text("patch_size = 22\n"), InvalidArgument);
  try {
    parse_config_text("patchsize = 21\n");
    FAIL("expected rejection");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("patchsize") != std::string::npos);
  }
  try {
    parse_config_text("hidden = many\n");
    FAIL("expected a type error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("hidden") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_text("wavelet = haar\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config_text("no equals sign\n"), InvalidArgument);

  testing::TempDir dir("cfg");
  write_text(dir / "run.cfg", "volume_size = 32\n");
  CHECK(parse_config(dir / "run.cfg").volume_size == 32);

  // The echo covers every key and parses back to the same values.
  RunConfig echo;
  for (const auto& [k, v] : c.entries()) echo.set(k, v);
  CHECK(echo.entries() == c.entries());
}
