#pragma once

#include <optional>
#include <string>
#include <vector>

#include "loctomo/volume.hpp"

namespace loctomo {

struct FscCurve {
  std::vector<double> shell_centers;  // cycles/pixel, ascending
  std::vector<double> values;         // clamped to [-1, 1]
  std::vector<long> counts;           // Fourier samples per shell (half-space)
  std::vector<bool> empty;            // shells without samples report 0
  double pixel_size = 1.0;            // Angstrom
  std::string note;
};

struct Box {
  int x0 = 0, y0 = 0, z0 = 0;
  int x1 = 0, y1 = 0, z1 = 0;  // exclusive
};

// Shell k is centred on k * 0.5 / n_shells cycles/pixel with unit index width
// when n_shells = floor(min_dim / 2). n_shells <= 0 selects that default.
// With `mask`, voxels outside the box are zeroed in both volumes first.
FscCurve fsc(const Volume& a, const Volume& b, int n_shells = 0, const Box* mask = nullptr);

// Same computation; annotated because it is only meaningful for
// reconstructions from statistically independent data halves.
FscCurve self_fsc(const Volume& a, const Volume& b, int n_shells = 0, const Box* mask = nullptr);

// First downward crossing of `threshold`, linearly interpolated between
// shells, in Angstrom. nullopt when the curve never drops below it.
std::optional<double> resolution_at(const FscCurve& curve, double threshold);

struct Histogram {
  std::vector<double> edges;  // n_bins + 1
  std::vector<double> mass;   // sums to 1
  double region_std = 0.0;
};

// Volume scaled to unit global std, region mean subtracted, values binned
// over [-range, range] (out-of-range values go to the edge bins).
Histogram empty_region_histogram(const Volume& volume, const Box& region, int n_bins, double range = 4.0);

double mse(const Volume& a, const Volume& b);
// Peak taken as the value range of the reference `a`.
double psnr(const Volume& a, const Volume& b);
double pearson(const Volume& a, const Volume& b);

}  // namespace loctomo
