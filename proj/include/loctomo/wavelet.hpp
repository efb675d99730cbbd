#pragma once

#include <array>
#include <string>
#include <vector>

#include "loctomo/volume.hpp"

namespace loctomo {

// Biorthogonal two-channel filter bank with odd-length symmetric taps,
// stored centred. Analysis low-pass is evaluated at even samples and the
// high-pass at odd samples.
struct WaveletBank {
  std::string family;
  std::vector<double> analysis_low;
  std::vector<double> analysis_high;
  std::vector<double> synthesis_low;
  std::vector<double> synthesis_high;

  // "bior2.2" (CDF 5/3) or "bior4.4" (CDF 9/7). Validates perfect
  // reconstruction on random signals before returning.
  static WaveletBank named(const std::string& family);

  // Largest distance, in fine-grid samples, between a coarse site's block
  // centre (2i + 0.5) and any input sample of its analysis filters.
  double support_radius() const;

  // Throws InvalidArgument when round-trip error on random signals is
  // >= 1e-10 or the taps are not odd-length.
  void verify() const;
};

// 1-D single-level transform of an even-length signal with whole-sample
// symmetric extension.
void dwt1(const WaveletBank& bank, const double* in, int n, int stride, double* low, double* high);
void idwt1(const WaveletBank& bank, const double* low, const double* high, int n, double* out,
           int stride);

// Band b has high-pass along x if (b & 4), along y if (b & 2), along z if (b & 1):
// 0 = LLL, 1 = LLH, 2 = LHL, 3 = LHH, 4 = HLL, 5 = HLH, 6 = HHL, 7 = HHH.
struct SubbandSet {
  std::array<Volume, 8> bands;
  Dims3 parent{};  // dims before padding
  Dims3 padded{};  // even dims actually transformed

  const Dims3& coarse_dims() const { return bands[0].dims(); }
};

SubbandSet dwt3(const Volume& volume, const WaveletBank& bank);
Volume idwt3(const SubbandSet& subbands, const WaveletBank& bank);

// Training targets for wavelet mode; requires even dims.
SubbandSet wavelet_targets(const Volume& volume, const WaveletBank& bank);

// Rejects banks whose analysis support, seen from any tilt, leaves the
// P x P patch footprint.
void check_support_containment(const WaveletBank& bank, int patch_size, double patch_spacing,
                               double voxel_size, double pixel_x, double pixel_y);

}  // namespace loctomo
