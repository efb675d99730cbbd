#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "loctomo/geometry.hpp"
#include "loctomo/volume.hpp"

namespace loctomo {

enum class NoiseKind { none, gaussian, poisson };

struct NoiseModel {
  NoiseKind kind = NoiseKind::none;
  double sigma = 0.0;   // gaussian std
  double dose = 1.0;    // poisson counts per unit signal
  std::uint64_t seed = 0;

  void validate() const;
};

enum class PhantomKind { spheres, shells, point_grid };

struct PhantomSpec {
  PhantomKind kind = PhantomKind::spheres;
  Dims3 size{64, 64, 64};
  int count = 12;
  std::uint64_t seed = 0;
  double density_lo = 0.5;
  double density_hi = 1.5;
  double voxel_size = 1.0;

  void validate() const;
};

// Line integrals of V(R_theta r) along r_z, sampled every `step` voxels with
// trilinear interpolation. kernel_width > 1 averages ceil(kernel_width)^2
// sub-pixel rays over the pixel box.
TiltSeries project(const Volume& volume, std::span<const double> angles,
                   const DetectorSpec& detector, double step = 0.5);

TiltSeries apply_noise(const TiltSeries& tilt_series, const NoiseModel& model);

// Two realisations with independent streams derived from model.seed.
std::pair<TiltSeries, TiltSeries> apply_noise_pair(const TiltSeries& tilt_series,
                                                   const NoiseModel& model);

Volume make_phantom(const PhantomSpec& spec);

// Uniformly spaced tilt angles in radians, from lo to hi degrees inclusive.
std::vector<double> tilt_range_deg(double lo_deg, double hi_deg, double step_deg);

// Stream seed for (seed, stream) pairs; splitmix64 based.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace loctomo
