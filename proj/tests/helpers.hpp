#pragma once

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

#include "loctomo/geometry.hpp"
#include "loctomo/volume.hpp"

namespace testing {

inline loctomo::Volume random_volume(loctomo::Dims3 d, std::uint64_t seed, double voxel = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  loctomo::Volume v(d, voxel);
  for (double& x : v.data()) x = g(rng);
  return v;
}

inline loctomo::PatchStack random_stack(int p, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> a(-1.0, 1.0);
  loctomo::PatchStack s;
  s.patch_size = p;
  s.angles.resize(static_cast<std::size_t>(n));
  for (double& t : s.angles) t = a(rng);
  s.data.resize(static_cast<std::size_t>(n) * s.slice_stride());
  for (double& x : s.data) x = g(rng);
  return s;
}

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("loctomo_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
