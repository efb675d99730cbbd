#pragma once

#include "loctomo/net.hpp"
#include "loctomo/wavelet.hpp"

namespace loctomo {

struct ReconOptions {
  double patch_spacing = 1.0;
  int chunk_size = 4096;  // voxels (or coarse sites) evaluated per batch
};

struct ReconStats {
  long evaluations = 0;
  double network_ms = 0.0;
  double transform_ms = 0.0;
};

// Evaluates the pixel-mode network at every voxel of the grid.
Volume reconstruct_pixel(const SliceMlpParams& params, const TiltSeries& filtered, const Dims3& dims,
                         double voxel_size, const ReconOptions& options = {},
                         ReconStats* stats = nullptr);

// Evaluates the wavelet-mode network once per coarse site (block centre
// 2i + 0.5 in voxel units) and inverts the transform. Needs even dims.
Volume reconstruct_wavelet(const SliceMlpParams& params, const TiltSeries& filtered, const Dims3& dims,
                           double voxel_size, const WaveletBank& bank, const ReconOptions& options = {},
                           ReconStats* stats = nullptr);

}  // namespace loctomo
