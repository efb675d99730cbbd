#include "loctomo/volume.hpp"

#include <cmath>
#include <string>

namespace loctomo {

namespace {

void check_dims(const Dims3& d) {
  if (d.nx < 1 || d.ny < 1 || d.nz < 1)
    throw InvalidArgument("volume dims must be >= 1, got " + std::to_string(d.nx) + "x" +
                          std::to_string(d.ny) + "x" + std::to_string(d.nz));
}

}  // namespace

Volume::Volume(Dims3 dims, double voxel_size) : dims_(dims), data_() {
  check_dims(dims);
  set_voxel_size(voxel_size);
  data_.assign(dims.count(), 0.0);
}

Volume::Volume(Dims3 dims, double voxel_size, std::vector<double> data)
    : dims_(dims), data_(std::move(data)) {
  check_dims(dims);
  set_voxel_size(voxel_size);
  if (data_.size() != dims.count())
    throw InvalidArgument("volume payload size does not match dims");
}

void Volume::set_voxel_size(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("voxel_size must be > 0");
  voxel_size_ = v;
}

double Volume::trilinear(double x, double y, double z) const {
  const double fx = std::floor(x), fy = std::floor(y), fz = std::floor(z);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy), z0 = static_cast<int>(fz);
  if (x0 < -1 || y0 < -1 || z0 < -1 || x0 >= dims_.nx || y0 >= dims_.ny || z0 >= dims_.nz)
    return 0.0;
  const double tx = x - fx, ty = y - fy, tz = z - fz;
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz) {
    const int zi = z0 + dz;
    if (zi < 0 || zi >= dims_.nz) continue;
    const double wz = dz ? tz : 1.0 - tz;
    for (int dy = 0; dy < 2; ++dy) {
      const int yi = y0 + dy;
      if (yi < 0 || yi >= dims_.ny) continue;
      const double wyz = wz * (dy ? ty : 1.0 - ty);
      for (int dx = 0; dx < 2; ++dx) {
        const int xi = x0 + dx;
        if (xi < 0 || xi >= dims_.nx) continue;
        acc += wyz * (dx ? tx : 1.0 - tx) * at(xi, yi, zi);
      }
    }
  }
  return acc;
}

void Volume::check_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) throw InvalidArgument("volume contains non-finite values");
}

}  // namespace loctomo
