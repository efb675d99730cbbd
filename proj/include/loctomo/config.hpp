#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "loctomo/fbp.hpp"
#include "loctomo/forward.hpp"
#include "loctomo/net.hpp"
#include "loctomo/train.hpp"

namespace loctomo {

// Typed run configuration. Text form is flat `key = value` lines; `#`
// starts a comment. Unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = runtime default

  // simulation
  int volume_size = 64;
  double voxel_size = 1.0;  // Angstrom
  PhantomKind phantom = PhantomKind::spheres;
  int phantom_count = 12;
  double density_lo = 0.5;
  double density_hi = 1.5;
  double tilt_min = -60.0;  // degrees
  double tilt_max = 60.0;
  double tilt_step = 3.0;
  double projection_step = 0.5;
  double kernel_width = 0.0;
  NoiseKind noise = NoiseKind::gaussian;
  double noise_sigma = 5.0;
  double noise_dose = 100.0;

  // filtering
  FilterWindow filter = FilterWindow::cosine_ramp;
  int pad_factor = 2;

  // network
  int patch_size = 21;
  double patch_spacing = 1.0;
  int hidden = 128;
  int depth = 5;
  int feature_dim = 128;
  int pe_dim = 128;
  double pe_scale = 0.0;
  Pooling pooling = Pooling::mean;

  // training
  int batch_size = 32;
  long steps = 1000;
  double lr = 1e-3;
  LrSchedule lr_schedule = LrSchedule::cosine;
  int tilt_drop_max = 30;
  bool n2n = true;
  ReconMode mode = ReconMode::pixel;
  std::string wavelet = "bior2.2";

  // inference / evaluation
  int chunk_size = 4096;
  int n_shells = 0;

  NetConfig net_config() const;
  TrainConfig train_config() const;
  FilterSpec filter_spec() const;

  // Applies one key; throws InvalidArgument naming the key on unknown keys
  // or bad values.
  void set(const std::string& key, const std::string& value);
  void validate() const;

  // Ordered key/value listing (every key, current values).
  std::vector<std::pair<std::string, std::string>> entries() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::filesystem::path& path);

std::string to_string(FilterWindow w);
std::string to_string(NoiseKind k);
std::string to_string(PhantomKind k);
std::string to_string(Pooling p);
std::string to_string(ReconMode m);
std::string to_string(LrSchedule s);

FilterWindow parse_filter(const std::string& s);
NoiseKind parse_noise(const std::string& s);
PhantomKind parse_phantom(const std::string& s);
Pooling parse_pooling(const std::string& s);
ReconMode parse_mode(const std::string& s);
LrSchedule parse_schedule(const std::string& s);

}  // namespace loctomo
