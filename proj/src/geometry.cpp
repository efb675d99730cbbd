#include "loctomo/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace loctomo {

void DetectorSpec::validate() const {
  if (width < 1 || height < 1) throw InvalidArgument("detector width/height must be >= 1");
  if (!(pixel_x > 0.0) || !(pixel_y > 0.0)) throw InvalidArgument("pixel size must be > 0");
  if (!(kernel_width >= 0.0)) throw InvalidArgument("kernel_width must be >= 0");
}

TiltSeries::TiltSeries(DetectorSpec det, std::vector<double> angles_rad)
    : detector(det), angles(std::move(angles_rad)) {
  detector.validate();
  data.assign(angles.size() * pixels_per_projection(), 0.0);
}

ImageView TiltSeries::projection(std::size_t k) const {
  const std::size_t n = pixels_per_projection();
  return {std::span<const double>(data).subspan(k * n, n), detector.width, detector.height};
}

std::span<double> TiltSeries::projection_data(std::size_t k) {
  const std::size_t n = pixels_per_projection();
  return std::span<double>(data).subspan(k * n, n);
}

TiltSeries TiltSeries::subset(std::span<const std::size_t> keep) const {
  TiltSeries out;
  out.detector = detector;
  out.filtered = filtered;
  const std::size_t n = pixels_per_projection();
  out.angles.reserve(keep.size());
  out.data.reserve(keep.size() * n);
  for (std::size_t k : keep) {
    if (k >= count()) throw InvalidArgument("tilt index out of range");
    out.angles.push_back(angles[k]);
    auto p = projection(k).data;
    out.data.insert(out.data.end(), p.begin(), p.end());
  }
  return out;
}

void TiltSeries::validate() const {
  detector.validate();
  if (angles.empty()) throw InvalidArgument("tilt-series needs at least one projection");
  if (data.size() != angles.size() * pixels_per_projection())
    throw InvalidArgument("tilt-series payload does not match angle count");
  for (double a : angles)
    if (!(std::abs(a) < std::numbers::pi / 2))
      throw InvalidArgument("tilt angle outside (-pi/2, pi/2): " + std::to_string(a));
}

void PatchSpec::validate() const {
  if (size < 1 || size % 2 == 0)
    throw InvalidArgument("patch size must be a positive odd integer, got " + std::to_string(size));
  if (!(spacing > 0.0)) throw InvalidArgument("patch spacing must be > 0");
}

void PatchStack::validate() const {
  if (patch_size < 1 || patch_size % 2 == 0) throw InvalidArgument("bad patch size");
  if (data.size() != angles.size() * slice_stride())
    throw InvalidArgument("patch stack size does not match angle count");
}

Mat3 rotation_matrix(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {{{c, 0.0, s}, {0.0, 1.0, 0.0}, {-s, 0.0, c}}};
}

Vec3 apply(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
          m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
          m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
}

TrajectoryPoint trajectory(const Vec3& r0, double theta) {
  return {r0.x * std::cos(theta) - r0.z * std::sin(theta), r0.y};
}

double sample_bilinear(const ImageView& image, double col, double row) {
  const double fc = std::floor(col), fr = std::floor(row);
  if (!(fc >= -1.0 && fr >= -1.0 && fc < image.width && fr < image.height)) return 0.0;
  const int c0 = static_cast<int>(fc), r0 = static_cast<int>(fr);
  const double tc = col - fc, tr = row - fr;
  const bool c0_in = c0 >= 0, c1_in = c0 + 1 < image.width;
  const bool r0_in = r0 >= 0, r1_in = r0 + 1 < image.height;
  double acc = 0.0;
  if (r0_in) {
    if (c0_in) acc += (1.0 - tr) * (1.0 - tc) * image.at(c0, r0);
    if (c1_in && tc != 0.0) acc += (1.0 - tr) * tc * image.at(c0 + 1, r0);
  }
  if (r1_in && tr != 0.0) {
    if (c0_in) acc += tr * (1.0 - tc) * image.at(c0, r0 + 1);
    if (c1_in && tc != 0.0) acc += tr * tc * image.at(c0 + 1, r0 + 1);
  }
  return acc;
}

double sample_detector(const ImageView& image, const TrajectoryPoint& p) {
  return sample_bilinear(image, p.u + 0.5 * (image.width - 1), p.v + 0.5 * (image.height - 1));
}

Vec3 grid_point(const Dims3& dims, double voxel_size, const DetectorSpec& det, double ix,
                double iy, double iz) {
  const double sx = voxel_size / det.pixel_x;
  const double sy = voxel_size / det.pixel_y;
  return {(ix - 0.5 * (dims.nx - 1)) * sx, (iy - 0.5 * (dims.ny - 1)) * sy,
          (iz - 0.5 * (dims.nz - 1)) * sx};
}

void extract_patch_into(const ImageView& filtered_projection, const DetectorSpec& det,
                        const Vec3& r0, double theta, const PatchSpec& spec,
                        std::span<double> out) {
  const int p = spec.size;
  const int h = spec.half();
  const TrajectoryPoint t = trajectory(r0, theta);
  const double col0 = detector_col(det, t.u);
  const double row0 = detector_row(det, t.v);
  for (int a = 0; a < p; ++a) {
    const double row = row0 - spec.spacing * (a - h);
    for (int b = 0; b < p; ++b) {
      const double col = col0 - spec.spacing * (b - h);
      out[static_cast<std::size_t>(a) * p + b] = sample_bilinear(filtered_projection, col, row);
    }
  }
}

std::vector<double> extract_patch(const ImageView& filtered_projection, const DetectorSpec& det,
                                  const Vec3& r0, double theta, const PatchSpec& spec) {
  spec.validate();
  if (filtered_projection.data.empty()) throw InvalidArgument("empty projection");
  std::vector<double> out(static_cast<std::size_t>(spec.size) * spec.size);
  extract_patch_into(filtered_projection, det, r0, theta, spec, out);
  return out;
}

PatchStack extract_patch_stack(const TiltSeries& tilt_series, const Vec3& r0,
                               const PatchSpec& spec) {
  if (!tilt_series.filtered)
    throw InvalidArgument("patch extraction expects a filtered tilt-series");
  spec.validate();
  PatchStack stack;
  stack.patch_size = spec.size;
  stack.angles = tilt_series.angles;
  stack.data.resize(tilt_series.count() * stack.slice_stride());
  for (std::size_t k = 0; k < tilt_series.count(); ++k) {
    extract_patch_into(tilt_series.projection(k), tilt_series.detector, r0,
                       tilt_series.angles[k], spec,
                       std::span<double>(stack.data).subspan(k * stack.slice_stride(),
                                                             stack.slice_stride()));
  }
  return stack;
}

}  // namespace loctomo
