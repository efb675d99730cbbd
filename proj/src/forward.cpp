#include "loctomo/forward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace loctomo {

void NoiseModel::validate() const {
  if (kind == NoiseKind::gaussian && !(sigma >= 0.0))
    throw InvalidArgument("gaussian noise requires sigma >= 0");
  if (kind == NoiseKind::poisson && !(dose > 0.0))
    throw InvalidArgument("poisson noise requires dose > 0");
}

void PhantomSpec::validate() const {
  if (size.nx < 1 || size.ny < 1 || size.nz < 1) throw InvalidArgument("phantom size must be >= 1");
  if (kind != PhantomKind::point_grid && (size.nx < 8 || size.ny < 8 || size.nz < 8))
    throw InvalidArgument("sphere/shell phantoms need at least 8 voxels per axis");
  if (count < 1) throw InvalidArgument("phantom count must be >= 1");
  if (!(density_lo <= density_hi)) throw InvalidArgument("density range is inverted");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<double> tilt_range_deg(double lo_deg, double hi_deg, double step_deg) {
  if (!(step_deg > 0.0) || hi_deg < lo_deg) throw InvalidArgument("bad tilt range");
  const int n = static_cast<int>(std::floor((hi_deg - lo_deg) / step_deg + 1e-9)) + 1;
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out[k] = (lo_deg + k * step_deg) * std::numbers::pi / 180.0;
  return out;
}

namespace {

// Parameter interval where a line p + t d lies inside (lo, hi) on one axis.
void clip_axis(double p, double d, double lo, double hi, double& t0, double& t1) {
  if (std::abs(d) < 1e-15) {
    if (p <= lo || p >= hi) t1 = t0 - 1.0;
    return;
  }
  double a = (lo - p) / d, b = (hi - p) / d;
  if (a > b) std::swap(a, b);
  t0 = std::max(t0, a);
  t1 = std::min(t1, b);
}

}  // namespace

TiltSeries project(const Volume& volume, std::span<const double> angles,
                   const DetectorSpec& detector, double step) {
  if (!(step > 0.0)) throw InvalidArgument("projection step must be > 0");
  if (angles.empty()) throw InvalidArgument("projection needs at least one angle");
  volume.check_finite();
  detector.validate();

  TiltSeries out(detector, std::vector<double>(angles.begin(), angles.end()));
  const Dims3 d = volume.dims();
  const double cx = 0.5 * (d.nx - 1), cy = 0.5 * (d.ny - 1), cz = 0.5 * (d.nz - 1);
  const double sx = detector.pixel_x / volume.voxel_size();
  const double sy = detector.pixel_y / volume.voxel_size();
  const int sub = std::max(1, static_cast<int>(std::ceil(detector.kernel_width - 1e-12)));
  const double kw = sub > 1 ? detector.kernel_width : 0.0;
  const int w = detector.width, h = detector.height;
  const long rows = static_cast<long>(angles.size()) * h;

#pragma omp parallel for schedule(dynamic)
  for (long job = 0; job < rows; ++job) {
    const std::size_t k = static_cast<std::size_t>(job / h);
    const int row = static_cast<int>(job % h);
    const double c = std::cos(angles[k]), s = std::sin(angles[k]);
    auto proj = out.projection_data(k);
    for (int col = 0; col < w; ++col) {
      double acc = 0.0;
      for (int a = 0; a < sub; ++a) {
        const double dv = sub > 1 ? ((a + 0.5) / sub - 0.5) * kw : 0.0;
        const double y = (row - 0.5 * (h - 1) + dv) * sy;
        if (y + cy <= -1.0 || y + cy >= d.ny) continue;
        for (int b = 0; b < sub; ++b) {
          const double du = sub > 1 ? ((b + 0.5) / sub - 0.5) * kw : 0.0;
          const double u = (col - 0.5 * (w - 1) + du) * sx;
          // Ray point at parameter t (voxels): (u c + t s, y, -u s + t c).
          const double px = u * c, pz = -u * s;
          double t0 = -1e300, t1 = 1e300;
          clip_axis(px, s, -cx - 1.0, cx + 1.0, t0, t1);
          clip_axis(pz, c, -cz - 1.0, cz + 1.0, t0, t1);
          if (!(t1 > t0)) continue;
          const long k0 = static_cast<long>(std::ceil(t0 / step));
          const long k1 = static_cast<long>(std::floor(t1 / step));
          double line = 0.0;
          for (long q = k0; q <= k1; ++q) {
            const double t = q * step;
            line += volume.trilinear(px + t * s + cx, y + cy, pz + t * c + cz);
          }
          acc += line * step;
        }
      }
      proj[static_cast<std::size_t>(row) * w + col] = acc / (sub * sub);
    }
  }
  return out;
}

namespace {

void add_noise(TiltSeries& ts, const NoiseModel& model, std::uint64_t stream_seed) {
  if (model.kind == NoiseKind::poisson) {
    for (double v : ts.data)
      if (v < 0.0) throw InvalidArgument("poisson noise requires non-negative signal");
  }
  const long n = static_cast<long>(ts.count());
#pragma omp parallel for schedule(static)
  for (long k = 0; k < n; ++k) {
    std::mt19937_64 rng(derive_seed(stream_seed, static_cast<std::uint64_t>(k)));
    auto p = ts.projection_data(static_cast<std::size_t>(k));
    if (model.kind == NoiseKind::gaussian) {
      std::normal_distribution<double> g(0.0, model.sigma);
      for (double& v : p) v += g(rng);
    } else if (model.kind == NoiseKind::poisson) {
      for (double& v : p) {
        const double mean = model.dose * v;
        v = mean > 0.0 ? static_cast<double>(std::poisson_distribution<long>(mean)(rng)) / model.dose
                       : 0.0;
      }
    }
  }
}

}  // namespace

TiltSeries apply_noise(const TiltSeries& tilt_series, const NoiseModel& model) {
  model.validate();
  TiltSeries out = tilt_series;
  if (model.kind == NoiseKind::none) return out;
  add_noise(out, model, derive_seed(model.seed, 0));
  return out;
}

std::pair<TiltSeries, TiltSeries> apply_noise_pair(const TiltSeries& tilt_series,
                                                   const NoiseModel& model) {
  model.validate();
  TiltSeries even = tilt_series, odd = tilt_series;
  if (model.kind == NoiseKind::none) return {std::move(even), std::move(odd)};
  add_noise(even, model, derive_seed(model.seed, 0));
  add_noise(odd, model, derive_seed(model.seed, 1));
  return {std::move(even), std::move(odd)};
}

namespace {

struct Blob {
  double x, y, z, r;
};

// Centres stay inside the cylinder inscribed in the x-z square so every
// object is seen by a detector as wide as the volume at all tilts.
bool fits(const Dims3& d, double x, double y, double z, double r) {
  const double cx = 0.5 * (d.nx - 1), cz = 0.5 * (d.nz - 1);
  const double radius = 0.5 * std::min(d.nx, d.nz) - 1.5;
  const double dx = x - cx, dz = z - cz;
  if (std::sqrt(dx * dx + dz * dz) + r > radius) return false;
  return y - r >= 1.0 && y + r <= d.ny - 2.0;
}

std::vector<Blob> place_blobs(const PhantomSpec& spec, std::mt19937_64& rng, double rmin,
                              double rmax) {
  const Dims3& d = spec.size;
  std::uniform_real_distribution<double> ux(0.0, d.nx - 1), uy(0.0, d.ny - 1), uz(0.0, d.nz - 1);
  std::uniform_real_distribution<double> ur(rmin, rmax);
  std::vector<Blob> blobs;
  constexpr int kMaxTries = 200;
  for (int i = 0; i < spec.count; ++i) {
    for (int attempt = 0; attempt < kMaxTries; ++attempt) {
      Blob b{ux(rng), uy(rng), uz(rng), ur(rng)};
      if (!fits(d, b.x, b.y, b.z, b.r)) continue;
      bool clear = true;
      for (const Blob& o : blobs) {
        const double dx = b.x - o.x, dy = b.y - o.y, dz = b.z - o.z;
        if (std::sqrt(dx * dx + dy * dy + dz * dz) < b.r + o.r + 1.0) {
          clear = false;
          break;
        }
      }
      if (clear) {
        blobs.push_back(b);
        break;
      }
    }
  }
  return blobs;
}

}  // namespace

Volume make_phantom(const PhantomSpec& spec) {
  spec.validate();
  Volume vol(spec.size, spec.voxel_size);
  const Dims3& d = spec.size;
  std::mt19937_64 rng(derive_seed(spec.seed, 0x5048));
  std::uniform_real_distribution<double> dens(spec.density_lo, spec.density_hi);

  if (spec.kind == PhantomKind::point_grid) {
    const int per_axis = static_cast<int>(std::ceil(std::cbrt(static_cast<double>(spec.count)) - 1e-9));
    int placed = 0;
    for (int k = 0; k < per_axis && placed < spec.count; ++k)
      for (int j = 0; j < per_axis && placed < spec.count; ++j)
        for (int i = 0; i < per_axis && placed < spec.count; ++i, ++placed) {
          const int x = per_axis == 1 ? d.nx / 2 : (i + 1) * d.nx / (per_axis + 1);
          const int y = per_axis == 1 ? d.ny / 2 : (j + 1) * d.ny / (per_axis + 1);
          const int z = per_axis == 1 ? d.nz / 2 : (k + 1) * d.nz / (per_axis + 1);
          vol.at(x, y, z) = 1.0;
        }
    return vol;
  }

  const double extent = std::min({d.nx, d.ny, d.nz});
  if (spec.kind == PhantomKind::spheres) {
    const auto blobs = place_blobs(spec, rng, std::max(2.0, extent / 20.0), std::max(3.0, extent / 7.0));
    for (const Blob& b : blobs) {
      const double value = dens(rng);
      const int x0 = std::max(0, static_cast<int>(std::floor(b.x - b.r)));
      const int x1 = std::min(d.nx - 1, static_cast<int>(std::ceil(b.x + b.r)));
      const int y0 = std::max(0, static_cast<int>(std::floor(b.y - b.r)));
      const int y1 = std::min(d.ny - 1, static_cast<int>(std::ceil(b.y + b.r)));
      const int z0 = std::max(0, static_cast<int>(std::floor(b.z - b.r)));
      const int z1 = std::min(d.nz - 1, static_cast<int>(std::ceil(b.z + b.r)));
      for (int z = z0; z <= z1; ++z)
        for (int y = y0; y <= y1; ++y)
          for (int x = x0; x <= x1; ++x) {
            const double dx = x - b.x, dy = y - b.y, dz = z - b.z;
            if (dx * dx + dy * dy + dz * dz <= b.r * b.r) vol.at(x, y, z) = value;
          }
    }
    return vol;
  }

  // Shells: thin ellipsoidal membranes, random semi-axes and rotation about y.
  const auto blobs = place_blobs(spec, rng, std::max(3.0, extent / 12.0), std::max(4.0, extent / 5.0));
  std::uniform_real_distribution<double> aspect(0.6, 1.0);
  std::uniform_real_distribution<double> phase(0.0, std::numbers::pi);
  constexpr double kThickness = 1.0;
  for (const Blob& b : blobs) {
    const double value = dens(rng);
    const double ax = b.r, ay = b.r * aspect(rng), az = b.r * aspect(rng);
    const double phi = phase(rng);
    const double c = std::cos(phi), s = std::sin(phi);
    const int x0 = std::max(0, static_cast<int>(std::floor(b.x - b.r - 1)));
    const int x1 = std::min(d.nx - 1, static_cast<int>(std::ceil(b.x + b.r + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(b.y - b.r - 1)));
    const int y1 = std::min(d.ny - 1, static_cast<int>(std::ceil(b.y + b.r + 1)));
    const int z0 = std::max(0, static_cast<int>(std::floor(b.z - b.r - 1)));
    const int z1 = std::min(d.nz - 1, static_cast<int>(std::ceil(b.z + b.r + 1)));
    for (int z = z0; z <= z1; ++z)
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const double dx = x - b.x, dy = y - b.y, dz = z - b.z;
          const double ex = c * dx + s * dz, ez = -s * dx + c * dz;
          const double q = std::sqrt((ex * ex) / (ax * ax) + (dy * dy) / (ay * ay) + (ez * ez) / (az * az));
          // q - 1 scaled by the smallest semi-axis approximates distance to the surface.
          const double dist = std::abs(q - 1.0) * std::min({ax, ay, az});
          if (dist <= 0.5 * kThickness + 0.25) vol.at(x, y, z) = value;
        }
  }
  return vol;
}

}  // namespace loctomo
