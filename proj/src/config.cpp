#include "loctomo/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "loctomo/errors.hpp"
#include "loctomo/mrc.hpp"
#include "loctomo/wavelet.hpp"

namespace loctomo {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw InvalidArgument("config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* expected) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) bad_value(key, value, expected);
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) bad_value(key, value, expected);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value, "a boolean");
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <typename E>
E lookup(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  std::string names;
  for (const auto& [name, value] : table) names += (names.empty() ? "" : ", ") + std::string(name);
  throw InvalidArgument(std::string("unknown ") + what + " '" + s + "' (expected one of: " + names + ")");
}

}  // namespace

std::string to_string(FilterWindow w) { return w == FilterWindow::ramp ? "ramp" : "cosine_ramp"; }

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::none: return "none";
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::poisson: return "poisson";
  }
  return "?";
}

std::string to_string(PhantomKind k) {
  switch (k) {
    case PhantomKind::spheres: return "spheres";
    case PhantomKind::shells: return "shells";
    case PhantomKind::point_grid: return "point_grid";
  }
  return "?";
}

std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::mean: return "mean";
    case Pooling::sum: return "sum";
    case Pooling::max: return "max";
  }
  return "?";
}

std::string to_string(ReconMode m) { return m == ReconMode::pixel ? "pixel" : "wavelet"; }
std::string to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "cosine"; }

FilterWindow parse_filter(const std::string& s) {
  return lookup<FilterWindow>(s, {{"ramp", FilterWindow::ramp}, {"cosine_ramp", FilterWindow::cosine_ramp}},
                              "filter");
}

NoiseKind parse_noise(const std::string& s) {
  return lookup<NoiseKind>(
      s, {{"none", NoiseKind::none}, {"gaussian", NoiseKind::gaussian}, {"poisson", NoiseKind::poisson}}, "noise");
}

PhantomKind parse_phantom(const std::string& s) {
  return lookup<PhantomKind>(s,
                             {{"spheres", PhantomKind::spheres},
                              {"shells", PhantomKind::shells},
                              {"point_grid", PhantomKind::point_grid}},
                             "phantom");
}

Pooling parse_pooling(const std::string& s) {
  return lookup<Pooling>(s, {{"mean", Pooling::mean}, {"sum", Pooling::sum}, {"max", Pooling::max}}, "pooling");
}

ReconMode parse_mode(const std::string& s) {
  return lookup<ReconMode>(s, {{"pixel", ReconMode::pixel}, {"wavelet", ReconMode::wavelet}}, "mode");
}

LrSchedule parse_schedule(const std::string& s) {
  return lookup<LrSchedule>(s, {{"constant", LrSchedule::constant}, {"cosine", LrSchedule::cosine}},
                            "lr_schedule");
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  auto as_int = [&] { return parse_number<int>(key, v, "an integer"); };
  auto as_long = [&] { return parse_number<long>(key, v, "an integer"); };
  auto as_double = [&] { return parse_number<double>(key, v, "a number"); };
  auto wrap = [&](auto&& fn) {
    try {
      fn();
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("config key '" + key + "': " + e.what());
    }
  };

  if (key == "seed") seed = parse_number<std::uint64_t>(key, v, "a non-negative integer");
  else if (key == "threads") threads = as_int();
  else if (key == "volume_size") volume_size = as_int();
  else if (key == "voxel_size") voxel_size = as_double();
  else if (key == "phantom") wrap([&] { phantom = parse_phantom(v); });
  else if (key == "phantom_count") phantom_count = as_int();
  else if (key == "density_lo") density_lo = as_double();
  else if (key == "density_hi") density_hi = as_double();
  else if (key == "tilt_min") tilt_min = as_double();
  else if (key == "tilt_max") tilt_max = as_double();
  else if (key == "tilt_step") tilt_step = as_double();
  else if (key == "projection_step") projection_step = as_double();
  else if (key == "kernel_width") kernel_width = as_double();
  else if (key == "noise") wrap([&] { noise = parse_noise(v); });
  else if (key == "noise_sigma") noise_sigma = as_double();
  else if (key == "noise_dose") noise_dose = as_double();
  else if (key == "filter") wrap([&] { filter = parse_filter(v); });
  else if (key == "pad_factor") pad_factor = as_int();
  else if (key == "patch_size") patch_size = as_int();
  else if (key == "patch_spacing") patch_spacing = as_double();
  else if (key == "hidden") hidden = as_int();
  else if (key == "depth") depth = as_int();
  else if (key == "feature_dim") feature_dim = as_int();
  else if (key == "pe_dim") pe_dim = as_int();
  else if (key == "pe_scale") pe_scale = as_double();
  else if (key == "pooling") wrap([&] { pooling = parse_pooling(v); });
  else if (key == "batch_size") batch_size = as_int();
  else if (key == "steps") steps = as_long();
  else if (key == "lr") lr = as_double();
  else if (key == "lr_schedule") wrap([&] { lr_schedule = parse_schedule(v); });
  else if (key == "tilt_drop_max") tilt_drop_max = as_int();
  else if (key == "n2n") n2n = parse_bool(key, v);
  else if (key == "mode") wrap([&] { mode = parse_mode(v); });
  else if (key == "wavelet") wavelet = v;
  else if (key == "chunk_size") chunk_size = as_int();
  else if (key == "n_shells") n_shells = as_int();
  else throw InvalidArgument("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  return {
      {"seed", std::to_string(seed)},
      {"threads", std::to_string(threads)},
      {"volume_size", std::to_string(volume_size)},
      {"voxel_size", fmt(voxel_size)},
      {"phantom", to_string(phantom)},
      {"phantom_count", std::to_string(phantom_count)},
      {"density_lo", fmt(density_lo)},
      {"density_hi", fmt(density_hi)},
      {"tilt_min", fmt(tilt_min)},
      {"tilt_max", fmt(tilt_max)},
      {"tilt_step", fmt(tilt_step)},
      {"projection_step", fmt(projection_step)},
      {"kernel_width", fmt(kernel_width)},
      {"noise", to_string(noise)},
      {"noise_sigma", fmt(noise_sigma)},
      {"noise_dose", fmt(noise_dose)},
      {"filter", to_string(filter)},
      {"pad_factor", std::to_string(pad_factor)},
      {"patch_size", std::to_string(patch_size)},
      {"patch_spacing", fmt(patch_spacing)},
      {"hidden", std::to_string(hidden)},
      {"depth", std::to_string(depth)},
      {"feature_dim", std::to_string(feature_dim)},
      {"pe_dim", std::to_string(pe_dim)},
      {"pe_scale", fmt(pe_scale)},
      {"pooling", to_string(pooling)},
      {"batch_size", std::to_string(batch_size)},
      {"steps", std::to_string(steps)},
      {"lr", fmt(lr)},
      {"lr_schedule", to_string(lr_schedule)},
      {"tilt_drop_max", std::to_string(tilt_drop_max)},
      {"n2n", n2n ? "true" : "false"},
      {"mode", to_string(mode)},
      {"wavelet", wavelet},
      {"chunk_size", std::to_string(chunk_size)},
      {"n_shells", std::to_string(n_shells)},
  };
}

NetConfig RunConfig::net_config() const {
  NetConfig c;
  c.patch_size = patch_size;
  c.feature_dim = feature_dim;
  c.hidden = hidden;
  c.depth = depth;
  c.pe_dim = pe_dim;
  c.out_dim = mode == ReconMode::wavelet ? 8 : 1;
  c.pe_scale = pe_scale;
  c.pooling = pooling;
  return c;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  c.batch_size = batch_size;
  c.steps = steps;
  c.lr = lr;
  c.schedule = lr_schedule;
  c.tilt_drop_max = tilt_drop_max;
  c.n2n = n2n;
  c.seed = seed;
  c.mode = mode;
  c.patch_spacing = patch_spacing;
  return c;
}

FilterSpec RunConfig::filter_spec() const { return FilterSpec{filter, pad_factor}; }

void RunConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& msg) {
    throw InvalidArgument("config key '" + key + "': " + msg);
  };
  if (threads < 0) fail("threads", "must be >= 0");
  if (volume_size < 1) fail("volume_size", "must be >= 1");
  if (!(voxel_size > 0.0)) fail("voxel_size", "must be > 0");
  if (phantom_count < 1) fail("phantom_count", "must be >= 1");
  if (!(density_lo <= density_hi)) fail("density_lo", "must not exceed density_hi");
  if (!(tilt_step > 0.0)) fail("tilt_step", "must be > 0");
  if (!(tilt_min <= tilt_max)) fail("tilt_min", "must not exceed tilt_max");
  if (!(tilt_min > -90.0 && tilt_max < 90.0)) fail("tilt_max", "tilts must lie strictly inside (-90, 90)");
  if (!(projection_step > 0.0)) fail("projection_step", "must be > 0");
  if (kernel_width < 0.0) fail("kernel_width", "must be >= 0");
  if (noise_sigma < 0.0) fail("noise_sigma", "must be >= 0");
  if (!(noise_dose > 0.0)) fail("noise_dose", "must be > 0");
  if (pad_factor < 1) fail("pad_factor", "must be >= 1");
  if (patch_size < 1 || patch_size % 2 == 0) fail("patch_size", "must be a positive odd integer");
  if (!(patch_spacing > 0.0)) fail("patch_spacing", "must be > 0");
  if (chunk_size < 1) fail("chunk_size", "must be >= 1");
  if (n_shells < 0) fail("n_shells", "must be >= 0");
  if (wavelet != "bior2.2" && wavelet != "bior4.4")
    fail("wavelet", "unknown bank '" + wavelet + "' (expected bior2.2 or bior4.4)");
  net_config().validate();
  train_config().validate();
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw InvalidArgument("config line " + std::to_string(line_no) + ": missing key");
    cfg.set(key, line.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_config_text(std::string(bytes.begin(), bytes.end()));
}

}  // namespace loctomo
