#include "loctomo/fbp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>

namespace loctomo {

void FilterSpec::validate() const {
  if (pad_factor < 1) throw InvalidArgument("pad_factor must be >= 1");
}

double filter_response(FilterWindow window, double f) {
  const double a = std::abs(f);
  if (a > 0.5) return 0.0;
  if (window == FilterWindow::ramp) return a;
  return a * std::cos(std::numbers::pi * a);  // cos(pi f / (2 f_N)), f_N = 1/2
}

namespace {

// FFTW planning is not thread-safe; execution with new-array calls is.
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(fftw_plan_mutex());
    fftw_destroy_plan(p);
  }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

}  // namespace

TiltSeries filter_tilt_series(const TiltSeries& tilt_series, const FilterSpec& spec) {
  spec.validate();
  if (tilt_series.filtered) throw InvalidArgument("tilt-series is already filtered");
  tilt_series.validate();

  const int w = tilt_series.detector.width;
  const int h = tilt_series.detector.height;
  const int len = w * spec.pad_factor;
  const int nfreq = len / 2 + 1;

  std::vector<double> gain(static_cast<std::size_t>(nfreq));
  for (int k = 0; k < nfreq; ++k)
    gain[k] = filter_response(spec.window, static_cast<double>(k) / len) / len;

  Plan fwd, inv;
  {
    std::lock_guard lock(fftw_plan_mutex());
    double* buf = fftw_alloc_real(static_cast<std::size_t>(len));
    fftw_complex* spec_buf = fftw_alloc_complex(static_cast<std::size_t>(nfreq));
    fwd.reset(fftw_plan_dft_r2c_1d(len, buf, spec_buf, FFTW_ESTIMATE));
    inv.reset(fftw_plan_dft_c2r_1d(len, spec_buf, buf, FFTW_ESTIMATE));
    fftw_free(buf);
    fftw_free(spec_buf);
  }

  TiltSeries out = tilt_series;
  out.filtered = true;
  const long rows = static_cast<long>(tilt_series.count()) * h;

#pragma omp parallel
  {
    double* buf = fftw_alloc_real(static_cast<std::size_t>(len));
    fftw_complex* freq = fftw_alloc_complex(static_cast<std::size_t>(nfreq));
#pragma omp for schedule(static)
    for (long r = 0; r < rows; ++r) {
      double* row = out.data.data() + static_cast<std::size_t>(r) * w;
      std::copy(row, row + w, buf);
      std::fill(buf + w, buf + len, 0.0);
      fftw_execute_dft_r2c(fwd.get(), buf, freq);
      for (int k = 0; k < nfreq; ++k) {
        freq[k][0] *= gain[k];
        freq[k][1] *= gain[k];
      }
      fftw_execute_dft_c2r(inv.get(), freq, buf);
      std::copy(buf, buf + w, row);
    }
    fftw_free(buf);
    fftw_free(freq);
  }
  return out;
}

std::vector<double> quadrature_weights(const std::vector<double>& angles, AngularWeights scheme) {
  const std::size_t n = angles.size();
  std::vector<double> w(n, n ? std::numbers::pi / static_cast<double>(n) : 0.0);
  if (scheme == AngularWeights::uniform || n < 2) return w;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return angles[a] < angles[b]; });
  for (std::size_t i = 0; i < n; ++i) {
    const double here = angles[order[i]];
    const double left = i > 0 ? here - angles[order[i - 1]] : angles[order[1]] - angles[order[0]];
    const double right = i + 1 < n ? angles[order[i + 1]] - here
                                   : angles[order[n - 1]] - angles[order[n - 2]];
    w[order[i]] = 0.5 * (left + right);
  }
  return w;
}

Volume backproject(const TiltSeries& filtered, const Dims3& out_dims, double voxel_size,
                   AngularWeights scheme) {
  if (!filtered.filtered) throw InvalidArgument("backprojection expects a filtered tilt-series");
  filtered.validate();
  Volume vol(out_dims, voxel_size);
  const auto weights = quadrature_weights(filtered.angles, scheme);
  const std::size_t n = filtered.count();
  std::vector<double> cs(n), sn(n);
  for (std::size_t k = 0; k < n; ++k) {
    cs[k] = std::cos(filtered.angles[k]);
    sn[k] = std::sin(filtered.angles[k]);
  }
  const DetectorSpec& det = filtered.detector;

#pragma omp parallel for schedule(static)
  for (int z = 0; z < out_dims.nz; ++z) {
    for (int y = 0; y < out_dims.ny; ++y) {
      for (int x = 0; x < out_dims.nx; ++x) {
        const Vec3 r = grid_point(out_dims, voxel_size, det, x, y, z);
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const TrajectoryPoint t{r.x * cs[k] - r.z * sn[k], r.y};
          acc += weights[k] * sample_detector(filtered.projection(k), t);
        }
        vol.at(x, y, z) = acc;
      }
    }
  }
  return vol;
}

Volume fbp(const TiltSeries& tilt_series, const FilterSpec& spec, const Dims3& out_dims,
           double voxel_size, AngularWeights scheme) {
  return backproject(filter_tilt_series(tilt_series, spec), out_dims, voxel_size, scheme);
}

TiltSeries normalize_unit_std(const TiltSeries& tilt_series) {
  TiltSeries out = tilt_series;
  const double n = static_cast<double>(out.data.size());
  if (n == 0) return out;
  const double mean = std::accumulate(out.data.begin(), out.data.end(), 0.0) / n;
  double var = 0.0;
  for (double v : out.data) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (sd > 0.0)
    for (double& v : out.data) v /= sd;
  return out;
}

}  // namespace loctomo
