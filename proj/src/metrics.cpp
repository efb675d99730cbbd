#include "loctomo/metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numeric>

namespace loctomo {

namespace {

void require_same_dims(const Volume& a, const Volume& b) {
  const Dims3 da = a.dims(), db = b.dims();
  if (!(da == db))
    throw InvalidArgument("volume dims differ: " + std::to_string(da.nx) + "x" + std::to_string(da.ny) + "x" +
                          std::to_string(da.nz) + " vs " + std::to_string(db.nx) + "x" + std::to_string(db.ny) +
                          "x" + std::to_string(db.nz));
}

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// Half-spectrum (nz, ny, nx/2 + 1) of a real volume.
std::vector<std::complex<double>> rfft3(const Volume& v) {
  const Dims3 d = v.dims();
  const std::size_t nh = static_cast<std::size_t>(d.nx / 2 + 1);
  std::vector<double> in(v.data().begin(), v.data().end());
  std::vector<std::complex<double>> out(nh * static_cast<std::size_t>(d.ny) * static_cast<std::size_t>(d.nz));
  fftw_plan plan;
  {
    std::lock_guard lock(plan_mutex());
    plan = fftw_plan_dft_r2c_3d(d.nz, d.ny, d.nx, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(plan_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

}  // namespace

FscCurve fsc(const Volume& a, const Volume& b, int n_shells, const Box* mask) {
  require_same_dims(a, b);
  if (mask) {
    const Dims3 d = a.dims();
    const Box& m = *mask;
    if (m.x0 < 0 || m.y0 < 0 || m.z0 < 0 || m.x1 > d.nx || m.y1 > d.ny || m.z1 > d.nz || m.x0 >= m.x1 ||
        m.y0 >= m.y1 || m.z0 >= m.z1)
      throw InvalidArgument("FSC mask box is empty or out of bounds");
    auto masked = [&](const Volume& v) {
      Volume out(d, v.voxel_size());
      for (int z = m.z0; z < m.z1; ++z)
        for (int y = m.y0; y < m.y1; ++y)
          for (int x = m.x0; x < m.x1; ++x) out.at(x, y, z) = v.at(x, y, z);
      return out;
    };
    FscCurve c = fsc(masked(a), masked(b), n_shells);
    c.note = "box mask applied";
    return c;
  }
  auto all_zero = [](const Volume& v) {
    return std::all_of(v.data().begin(), v.data().end(), [](double x) { return x == 0.0; });
  };
  if (all_zero(a) || all_zero(b)) throw InvalidArgument("FSC is undefined for an all-zero volume");

  const Dims3 d = a.dims();
  const int min_dim = std::min({d.nx, d.ny, d.nz});
  if (n_shells <= 0) n_shells = std::max(2, min_dim / 2);
  if (n_shells < 2) throw InvalidArgument("n_shells must be >= 2");
  const double df = 0.5 / n_shells;

  const auto fa = rfft3(a);
  const auto fb = rfft3(b);
  std::vector<double> cross(static_cast<std::size_t>(n_shells), 0.0), pa(cross), pb(cross);
  std::vector<long> counts(static_cast<std::size_t>(n_shells), 0);

  const int nh = d.nx / 2 + 1;
  std::size_t idx = 0;
  for (int kz = 0; kz < d.nz; ++kz) {
    const double fz = static_cast<double>(kz <= d.nz / 2 ? kz : kz - d.nz) / d.nz;
    for (int ky = 0; ky < d.ny; ++ky) {
      const double fy = static_cast<double>(ky <= d.ny / 2 ? ky : ky - d.ny) / d.ny;
      for (int kx = 0; kx < nh; ++kx, ++idx) {
        const double fx = static_cast<double>(kx) / d.nx;
        const double f = std::sqrt(fx * fx + fy * fy + fz * fz);
        const long shell = std::lround(f / df);
        if (shell >= n_shells) continue;
        // Columns 1..ceil(nx/2)-1 stand for their Hermitian mirror as well.
        const bool mirrored = kx > 0 && !(d.nx % 2 == 0 && kx == d.nx / 2);
        const double w = mirrored ? 2.0 : 1.0;
        const auto& za = fa[idx];
        const auto& zb = fb[idx];
        cross[shell] += w * (za.real() * zb.real() + za.imag() * zb.imag());
        pa[shell] += w * std::norm(za);
        pb[shell] += w * std::norm(zb);
        counts[shell] += 1;
      }
    }
  }

  FscCurve curve;
  curve.pixel_size = a.voxel_size();
  for (int k = 0; k < n_shells; ++k) {
    curve.shell_centers.push_back(k * df);
    curve.counts.push_back(counts[k]);
    const double denom = std::sqrt(pa[k] * pb[k]);
    const bool empty = counts[k] == 0 || denom == 0.0;
    curve.empty.push_back(empty);
    curve.values.push_back(empty ? 0.0 : std::clamp(cross[k] / denom, -1.0, 1.0));
  }
  return curve;
}

FscCurve self_fsc(const Volume& a, const Volume& b, int n_shells, const Box* mask) {
  FscCurve curve = fsc(a, b, n_shells, mask);
  if (mask) curve.note += "; ";
  curve.note += "self-FSC: valid only when the two reconstructions come from independent noise realisations";
  return curve;
}

std::optional<double> resolution_at(const FscCurve& curve, double threshold) {
  std::optional<std::size_t> prev;
  for (std::size_t k = 0; k < curve.values.size(); ++k) {
    if (curve.empty.size() == curve.values.size() && curve.empty[k]) continue;
    const double v = curve.values[k];
    if (prev && v < threshold) {
      const double v0 = curve.values[*prev];
      const double f0 = curve.shell_centers[*prev], f1 = curve.shell_centers[k];
      const double t = v0 == v ? 0.0 : (v0 - threshold) / (v0 - v);
      const double f = f0 + t * (f1 - f0);
      if (f <= 0.0) return std::nullopt;
      return curve.pixel_size / f;
    }
    prev = k;
  }
  return std::nullopt;
}

Histogram empty_region_histogram(const Volume& volume, const Box& region, int n_bins, double range) {
  const Dims3 d = volume.dims();
  if (n_bins < 1) throw InvalidArgument("n_bins must be >= 1");
  if (!(range > 0.0)) throw InvalidArgument("histogram range must be > 0");
  if (region.x0 < 0 || region.y0 < 0 || region.z0 < 0 || region.x1 > d.nx || region.y1 > d.ny ||
      region.z1 > d.nz)
    throw InvalidArgument("histogram region exceeds the volume bounds");
  if (region.x1 <= region.x0 || region.y1 <= region.y0 || region.z1 <= region.z0)
    throw InvalidArgument("histogram region is empty");

  const auto data = volume.data();
  const double n = static_cast<double>(data.size());
  const double mean = std::accumulate(data.begin(), data.end(), 0.0) / n;
  double var = 0.0;
  for (double v : data) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  const double scale = sd > 0.0 ? 1.0 / sd : 1.0;

  std::vector<double> values;
  for (int z = region.z0; z < region.z1; ++z)
    for (int y = region.y0; y < region.y1; ++y)
      for (int x = region.x0; x < region.x1; ++x) values.push_back(volume.at(x, y, z) * scale);
  const double rmean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double rvar = 0.0;
  for (double& v : values) {
    v -= rmean;
    rvar += v * v;
  }

  Histogram h;
  h.region_std = std::sqrt(rvar / values.size());
  h.edges.resize(static_cast<std::size_t>(n_bins) + 1);
  for (int i = 0; i <= n_bins; ++i) h.edges[i] = -range + 2.0 * range * i / n_bins;
  h.mass.assign(static_cast<std::size_t>(n_bins), 0.0);
  const double unit = 1.0 / static_cast<double>(values.size());
  for (double v : values) {
    int bin = static_cast<int>(std::floor((v + range) / (2.0 * range) * n_bins));
    bin = std::clamp(bin, 0, n_bins - 1);
    h.mass[bin] += unit;
  }
  return h;
}

double mse(const Volume& a, const Volume& b) {
  require_same_dims(a, b);
  double acc = 0.0;
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) acc += (da[i] - db[i]) * (da[i] - db[i]);
  return acc / static_cast<double>(da.size());
}

double psnr(const Volume& a, const Volume& b) {
  const auto [lo, hi] = std::minmax_element(a.data().begin(), a.data().end());
  const double peak = *hi - *lo;
  const double e = mse(a, b);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / e);
}

double pearson(const Volume& a, const Volume& b) {
  require_same_dims(a, b);
  const auto da = a.data(), db = b.data();
  const double n = static_cast<double>(da.size());
  const double ma = std::accumulate(da.begin(), da.end(), 0.0) / n;
  const double mb = std::accumulate(db.begin(), db.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double x = da[i] - ma, y = db[i] - mb;
    sab += x * y;
    saa += x * x;
    sbb += y * y;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace loctomo
