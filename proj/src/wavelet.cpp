#include "loctomo/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace loctomo {

namespace {

// Whole-sample symmetric reflection into [0, n).
inline int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::vector<double> scaled(std::initializer_list<double> taps, double s) {
  std::vector<double> out;
  for (double t : taps) out.push_back(t * s);
  return out;
}

// Alternating-sign copy used to derive synthesis filters from analysis ones.
std::vector<double> modulate(const std::vector<double>& taps, double s, int sign_of_first) {
  std::vector<double> out(taps.size());
  for (std::size_t i = 0; i < taps.size(); ++i)
    out[i] = taps[i] * s * ((i % 2 == 0) ? sign_of_first : -sign_of_first);
  return out;
}

}  // namespace

WaveletBank WaveletBank::named(const std::string& family) {
  const double r2 = std::numbers::sqrt2;
  WaveletBank bank;
  bank.family = family;
  if (family == "bior2.2") {
    bank.analysis_low = scaled({-1.0, 2.0, 6.0, 2.0, -1.0}, r2 / 8.0);
    bank.analysis_high = scaled({-1.0, 2.0, -1.0}, 1.0 / (2.0 * r2));
    bank.synthesis_low = scaled({1.0, 2.0, 1.0}, 1.0 / (2.0 * r2));
    bank.synthesis_high = scaled({-1.0, -2.0, 6.0, -2.0, -1.0}, r2 / 8.0);
  } else if (family == "bior4.4") {
    const std::vector<double> lo{0.026748757410810, -0.016864118442875, -0.078223266528988,
                                 0.266864118442872, 0.602949018236358, 0.266864118442872,
                                 -0.078223266528988, -0.016864118442875, 0.026748757410810};
    const std::vector<double> hi{0.045635881557125, -0.028771763114250, -0.295635881557125,
                                 0.557543526228500, -0.295635881557125, -0.028771763114250,
                                 0.045635881557125};
    for (double t : lo) bank.analysis_low.push_back(t * r2);
    for (double t : hi) bank.analysis_high.push_back(t * r2);
    bank.synthesis_low = modulate(hi, r2, -1);
    bank.synthesis_high = modulate(lo, r2, 1);
  } else {
    throw InvalidArgument("unknown wavelet family '" + family + "' (expected bior2.2 or bior4.4)");
  }
  bank.verify();
  return bank;
}

double WaveletBank::support_radius() const {
  const double low = static_cast<double>(analysis_low.size() / 2);
  const double high = static_cast<double>(analysis_high.size() / 2);
  // Low-pass centred on 2i, high-pass on 2i + 1; block centre at 2i + 0.5.
  return std::max(low + 0.5, high + 0.5);
}

void WaveletBank::verify() const {
  for (const auto* taps : {&analysis_low, &analysis_high, &synthesis_low, &synthesis_high})
    if (taps->empty() || taps->size() % 2 == 0)
      throw InvalidArgument("wavelet taps must have odd length");
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int n : {2, 4, 10, 32}) {
    std::vector<double> x(static_cast<std::size_t>(n)), lo(static_cast<std::size_t>(n / 2)),
        hi(static_cast<std::size_t>(n / 2)), y(static_cast<std::size_t>(n));
    for (double& v : x) v = g(rng);
    dwt1(*this, x.data(), n, 1, lo.data(), hi.data());
    idwt1(*this, lo.data(), hi.data(), n, y.data(), 1);
    for (int i = 0; i < n; ++i)
      if (std::abs(x[i] - y[i]) >= 1e-10)
        throw InvalidArgument("wavelet bank '" + family + "' fails perfect reconstruction");
  }
}

void dwt1(const WaveletBank& bank, const double* in, int n, int stride, double* low, double* high) {
  const int l0 = static_cast<int>(bank.analysis_low.size() / 2);
  const int l1 = static_cast<int>(bank.analysis_high.size() / 2);
  for (int k = 0; k < n / 2; ++k) {
    double a = 0.0, d = 0.0;
    for (int t = -l0; t <= l0; ++t) a += bank.analysis_low[t + l0] * in[reflect(2 * k + t, n) * stride];
    for (int t = -l1; t <= l1; ++t)
      d += bank.analysis_high[t + l1] * in[reflect(2 * k + 1 + t, n) * stride];
    low[k] = a;
    high[k] = d;
  }
}

void idwt1(const WaveletBank& bank, const double* low, const double* high, int n, double* out,
           int stride) {
  const int g0 = static_cast<int>(bank.synthesis_low.size() / 2);
  const int g1 = static_cast<int>(bank.synthesis_high.size() / 2);
  // Upsampled channels: low lives on even samples, high on odd ones.
  auto up_low = [&](int m) {
    m = reflect(m, n);
    return (m % 2 == 0) ? low[m / 2] : 0.0;
  };
  auto up_high = [&](int m) {
    m = reflect(m, n);
    return (m % 2 == 1) ? high[(m - 1) / 2] : 0.0;
  };
  for (int m = 0; m < n; ++m) {
    double acc = 0.0;
    for (int t = -g0; t <= g0; ++t) acc += bank.synthesis_low[t + g0] * up_low(m - t);
    for (int t = -g1; t <= g1; ++t) acc += bank.synthesis_high[t + g1] * up_high(m - t);
    out[m * stride] = acc;
  }
}

namespace {

int round_up_even(int n) { return n + (n % 2); }

// Applies a 1-D operation along one axis of a dense x-fastest array.
// axis 0 = x, 1 = y, 2 = z.
struct Lines {
  Dims3 dims;
  int axis;

  int length() const { return axis == 0 ? dims.nx : axis == 1 ? dims.ny : dims.nz; }
  int stride() const { return axis == 0 ? 1 : axis == 1 ? dims.nx : dims.nx * dims.ny; }
  long count() const { return static_cast<long>(dims.count() / static_cast<std::size_t>(length())); }
  // Offset of the first element of line j.
  std::size_t start(long j) const {
    const long nx = dims.nx, ny = dims.ny;
    if (axis == 0) return static_cast<std::size_t>(j * nx);
    if (axis == 1) return static_cast<std::size_t>((j % nx) + (j / nx) * nx * ny);
    return static_cast<std::size_t>(j);
  }
};

Dims3 halve(Dims3 d, int axis) {
  if (axis == 0) d.nx /= 2;
  if (axis == 1) d.ny /= 2;
  if (axis == 2) d.nz /= 2;
  return d;
}

// Splits `in` along `axis` into low/high halves.
void split_axis(const std::vector<double>& in, const Dims3& dims, int axis, const WaveletBank& bank,
                std::vector<double>& low, std::vector<double>& high) {
  const Dims3 half = halve(dims, axis);
  low.assign(half.count(), 0.0);
  high.assign(half.count(), 0.0);
  const Lines src{dims, axis}, dst{half, axis};
  const long lines = src.count();
#pragma omp parallel for schedule(static)
  for (long j = 0; j < lines; ++j) {
    const int n = src.length();
    std::vector<double> lo(static_cast<std::size_t>(n / 2)), hi(static_cast<std::size_t>(n / 2));
    dwt1(bank, in.data() + src.start(j), n, src.stride(), lo.data(), hi.data());
    const std::size_t o = dst.start(j);
    const int s = dst.stride();
    for (int k = 0; k < n / 2; ++k) {
      low[o + static_cast<std::size_t>(k) * s] = lo[k];
      high[o + static_cast<std::size_t>(k) * s] = hi[k];
    }
  }
}

void merge_axis(const std::vector<double>& low, const std::vector<double>& high, const Dims3& full,
                int axis, const WaveletBank& bank, std::vector<double>& out) {
  const Dims3 half = halve(full, axis);
  out.assign(full.count(), 0.0);
  const Lines src{half, axis}, dst{full, axis};
  const long lines = dst.count();
#pragma omp parallel for schedule(static)
  for (long j = 0; j < lines; ++j) {
    const int n = dst.length();
    std::vector<double> lo(static_cast<std::size_t>(n / 2)), hi(static_cast<std::size_t>(n / 2));
    const std::size_t o = src.start(j);
    const int s = src.stride();
    for (int k = 0; k < n / 2; ++k) {
      lo[k] = low[o + static_cast<std::size_t>(k) * s];
      hi[k] = high[o + static_cast<std::size_t>(k) * s];
    }
    idwt1(bank, lo.data(), hi.data(), n, out.data() + dst.start(j), dst.stride());
  }
}

}  // namespace

SubbandSet dwt3(const Volume& volume, const WaveletBank& bank) {
  const Dims3 parent = volume.dims();
  const Dims3 padded{round_up_even(parent.nx), round_up_even(parent.ny), round_up_even(parent.nz)};

  std::vector<double> work(padded.count());
  for (int z = 0; z < padded.nz; ++z)
    for (int y = 0; y < padded.ny; ++y)
      for (int x = 0; x < padded.nx; ++x)
        work[static_cast<std::size_t>(x) + static_cast<std::size_t>(padded.nx) *
                                               (static_cast<std::size_t>(y) +
                                                static_cast<std::size_t>(padded.ny) * z)] =
            volume.at(std::min(x, parent.nx - 1), std::min(y, parent.ny - 1), std::min(z, parent.nz - 1));

  // x split, then y, then z; band bit order follows (x, y, z).
  std::vector<std::vector<double>> level{std::move(work)};
  Dims3 dims = padded;
  for (int axis = 0; axis < 3; ++axis) {
    std::vector<std::vector<double>> next;
    for (const auto& part : level) {
      std::vector<double> lo, hi;
      split_axis(part, dims, axis, bank, lo, hi);
      next.push_back(std::move(lo));
      next.push_back(std::move(hi));
    }
    level = std::move(next);
    dims = halve(dims, axis);
  }

  SubbandSet out;
  out.parent = parent;
  out.padded = padded;
  for (int b = 0; b < 8; ++b) out.bands[b] = Volume(dims, volume.voxel_size() * 2.0, std::move(level[b]));
  return out;
}

Volume idwt3(const SubbandSet& subbands, const WaveletBank& bank) {
  const Dims3 coarse = subbands.coarse_dims();
  for (const auto& band : subbands.bands)
    if (!(band.dims() == coarse)) throw InvalidArgument("subband shapes differ");
  const Dims3 padded = subbands.padded;
  if (padded.nx != 2 * coarse.nx || padded.ny != 2 * coarse.ny || padded.nz != 2 * coarse.nz)
    throw InvalidArgument("subband shape does not match padded parent dims");

  std::vector<std::vector<double>> level;
  for (const auto& band : subbands.bands) level.emplace_back(band.data().begin(), band.data().end());
  // Undo z, then y, then x.
  Dims3 dims = coarse;
  for (int axis = 2; axis >= 0; --axis) {
    Dims3 full = dims;
    if (axis == 0) full.nx *= 2;
    if (axis == 1) full.ny *= 2;
    if (axis == 2) full.nz *= 2;
    std::vector<std::vector<double>> next;
    for (std::size_t i = 0; i < level.size(); i += 2) {
      std::vector<double> merged;
      merge_axis(level[i], level[i + 1], full, axis, bank, merged);
      next.push_back(std::move(merged));
    }
    level = std::move(next);
    dims = full;
  }

  const Dims3 parent = subbands.parent;
  const double voxel = subbands.bands[0].voxel_size() / 2.0;
  Volume out(parent, voxel);
  for (int z = 0; z < parent.nz; ++z)
    for (int y = 0; y < parent.ny; ++y)
      for (int x = 0; x < parent.nx; ++x)
        out.at(x, y, z) = level[0][static_cast<std::size_t>(x) +
                                   static_cast<std::size_t>(padded.nx) *
                                       (static_cast<std::size_t>(y) + static_cast<std::size_t>(padded.ny) * z)];
  return out;
}

SubbandSet wavelet_targets(const Volume& volume, const WaveletBank& bank) {
  const Dims3 d = volume.dims();
  if (d.nx % 2 || d.ny % 2 || d.nz % 2) throw InvalidArgument("wavelet targets need even dims");
  return dwt3(volume, bank);
}

void check_support_containment(const WaveletBank& bank, int patch_size, double patch_spacing,
                               double voxel_size, double pixel_x, double pixel_y) {
  const double reach = (patch_size / 2) * patch_spacing;
  const double r = bank.support_radius();
  // A box of half-width r in x-z projects to at most r (|cos| + |sin|) <= r sqrt(2).
  const double along_u = r * std::numbers::sqrt2 * voxel_size / pixel_x;
  const double along_v = r * voxel_size / pixel_y;
  if (along_u > reach || along_v > reach)
    throw InvalidArgument("wavelet '" + bank.family + "' support (" + std::to_string(along_u) +
                          " px) exceeds the patch half-width (" + std::to_string(reach) + " px)");
}

}  // namespace loctomo
