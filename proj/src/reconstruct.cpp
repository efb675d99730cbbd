#include "loctomo/reconstruct.hpp"

#include <algorithm>
#include <chrono>
#include <functional>

namespace loctomo {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void check_inputs(const SliceMlpParams& params, const TiltSeries& filtered, const ReconOptions& options) {
  if (params.parameter_count() == 0) throw InvalidArgument("network parameters are empty");
  if (!filtered.filtered) throw InvalidArgument("reconstruction expects a filtered tilt-series");
  filtered.validate();
  if (options.chunk_size < 1) throw InvalidArgument("chunk_size must be >= 1");
  PatchSpec{params.config().patch_size, options.patch_spacing}.validate();
}

// Evaluates the network at `count` grid-index positions produced by `site`
// and hands each output column to `sink`.
void evaluate_sites(const SliceMlpParams& params, const TiltSeries& filtered, const Dims3& grid,
                    double voxel_size, const ReconOptions& options, long count,
                    const std::function<Vec3(long)>& site,
                    const std::function<void(long, const Eigen::VectorXd&)>& sink) {
  const PatchSpec patch{params.config().patch_size, options.patch_spacing};
  const std::size_t n = filtered.count();
  std::vector<PatchStack> stacks;
  for (long begin = 0; begin < count; begin += options.chunk_size) {
    const long end = std::min(count, begin + options.chunk_size);
    stacks.resize(static_cast<std::size_t>(end - begin));
#pragma omp parallel for schedule(static)
    for (long i = begin; i < end; ++i) {
      PatchStack& st = stacks[static_cast<std::size_t>(i - begin)];
      st.patch_size = patch.size;
      st.angles = filtered.angles;
      st.data.resize(n * st.slice_stride());
      const Vec3 idx = site(i);
      const Vec3 r = grid_point(grid, voxel_size, filtered.detector, idx.x, idx.y, idx.z);
      for (std::size_t k = 0; k < n; ++k)
        extract_patch_into(filtered.projection(k), filtered.detector, r, filtered.angles[k], patch,
                           std::span<double>(st.data).subspan(k * st.slice_stride(), st.slice_stride()));
    }
    const Mat out = slice_mlp_forward_batch(params, stacks);
    for (long i = begin; i < end; ++i) sink(i, out.col(i - begin));
  }
}

}  // namespace

Volume reconstruct_pixel(const SliceMlpParams& params, const TiltSeries& filtered, const Dims3& dims,
                         double voxel_size, const ReconOptions& options, ReconStats* stats) {
  check_inputs(params, filtered, options);
  if (params.config().out_dim != 1) throw InvalidArgument("pixel reconstruction needs a pixel-mode network");
  Volume vol(dims, voxel_size);
  const auto t0 = Clock::now();
  const long count = static_cast<long>(dims.count());
  const long nx = dims.nx, ny = dims.ny;
  evaluate_sites(
      params, filtered, dims, voxel_size, options, count,
      [&](long i) {
        return Vec3{static_cast<double>(i % nx), static_cast<double>((i / nx) % ny),
                    static_cast<double>(i / (nx * ny))};
      },
      [&](long i, const Eigen::VectorXd& v) { vol.data()[static_cast<std::size_t>(i)] = v(0); });
  if (stats) {
    stats->evaluations = count;
    stats->network_ms = ms_since(t0);
    stats->transform_ms = 0.0;
  }
  return vol;
}

Volume reconstruct_wavelet(const SliceMlpParams& params, const TiltSeries& filtered, const Dims3& dims,
                           double voxel_size, const WaveletBank& bank, const ReconOptions& options,
                           ReconStats* stats) {
  check_inputs(params, filtered, options);
  if (params.config().out_dim != 8) throw InvalidArgument("wavelet reconstruction needs a wavelet-mode network");
  if (dims.nx % 2 || dims.ny % 2 || dims.nz % 2)
    throw InvalidArgument("wavelet reconstruction needs even grid dims");

  const Dims3 coarse{dims.nx / 2, dims.ny / 2, dims.nz / 2};
  SubbandSet subbands;
  subbands.parent = dims;
  subbands.padded = dims;
  for (auto& band : subbands.bands) band = Volume(coarse, voxel_size * 2.0);

  const auto t0 = Clock::now();
  const long count = static_cast<long>(coarse.count());
  const long cx = coarse.nx, cy = coarse.ny;
  evaluate_sites(
      params, filtered, dims, voxel_size, options, count,
      [&](long i) {
        return Vec3{2.0 * static_cast<double>(i % cx) + 0.5, 2.0 * static_cast<double>((i / cx) % cy) + 0.5,
                    2.0 * static_cast<double>(i / (cx * cy)) + 0.5};
      },
      [&](long i, const Eigen::VectorXd& v) {
        for (int b = 0; b < 8; ++b) subbands.bands[b].data()[static_cast<std::size_t>(i)] = v(b);
      });
  const double net_ms = ms_since(t0);
  const auto t1 = Clock::now();
  Volume vol = idwt3(subbands, bank);
  vol.set_voxel_size(voxel_size);
  if (stats) {
    stats->evaluations = count;
    stats->network_ms = net_ms;
    stats->transform_ms = ms_since(t1);
  }
  return vol;
}

}  // namespace loctomo
