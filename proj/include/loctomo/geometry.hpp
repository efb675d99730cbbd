#pragma once

// Single-tilt-axis acquisition geometry.
//
// Frames:
//  * volume frame: voxel units, origin at the volume centre, tilt axis = y.
//  * detector frame: centred pixel coordinates (u along columns, v along
//    rows). Coordinate 0 sits at index (n - 1) / 2.
// A volume point r0 projects at tilt theta to
//     u = r0.x cos(theta) - r0.z sin(theta),  v = r0.y.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "loctomo/volume.hpp"

namespace loctomo {

using Mat3 = std::array<std::array<double, 3>, 3>;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct DetectorSpec {
  int width = 0;
  int height = 0;
  double pixel_x = 1.0;  // Angstrom per pixel along u
  double pixel_y = 1.0;  // Angstrom per pixel along v
  double kernel_width = 0.0;  // box sampling kernel width, pixels

  void validate() const;
  bool operator==(const DetectorSpec&) const = default;
};

// Stack of N projections, each height x width with u fastest.
struct TiltSeries {
  DetectorSpec detector;
  std::vector<double> angles;  // radians, each in (-pi/2, pi/2)
  std::vector<double> data;    // N * height * width
  bool filtered = false;

  TiltSeries() = default;
  TiltSeries(DetectorSpec det, std::vector<double> angles_rad);

  std::size_t count() const { return angles.size(); }
  std::size_t pixels_per_projection() const {
    return static_cast<std::size_t>(detector.width) * static_cast<std::size_t>(detector.height);
  }
  ImageView projection(std::size_t k) const;
  std::span<double> projection_data(std::size_t k);

  // Keeps the listed tilts in the given order.
  TiltSeries subset(std::span<const std::size_t> keep) const;

  void validate() const;
};

// Centred detector coordinates of a trajectory sample.
struct TrajectoryPoint {
  double u = 0.0;
  double v = 0.0;
};

struct PatchSpec {
  int size = 21;
  double spacing = 1.0;

  int half() const { return size / 2; }
  void validate() const;
};

// N x P x P crops. Element (k, row, col) holds the projection sampled at
// trajectory - spacing * (col - P/2, row - P/2).
struct PatchStack {
  int patch_size = 0;
  std::vector<double> data;
  std::vector<double> angles;

  std::size_t count() const { return angles.size(); }
  std::size_t slice_stride() const {
    return static_cast<std::size_t>(patch_size) * static_cast<std::size_t>(patch_size);
  }
  double at(std::size_t k, int row, int col) const {
    return data[k * slice_stride() + static_cast<std::size_t>(row) * patch_size + col];
  }
  double center(std::size_t k) const { return at(k, patch_size / 2, patch_size / 2); }
  void validate() const;
};

Mat3 rotation_matrix(double theta);
Vec3 apply(const Mat3& m, const Vec3& v);

TrajectoryPoint trajectory(const Vec3& r0, double theta);

// Bilinear sample at array coordinates (col, row); the image is treated as
// zero-extended, so samples one pixel or more outside the grid are exactly 0.
double sample_bilinear(const ImageView& image, double col, double row);

// Centred detector coordinate to array index.
inline double detector_col(const DetectorSpec& d, double u) { return u + 0.5 * (d.width - 1); }
inline double detector_row(const DetectorSpec& d, double v) { return v + 0.5 * (d.height - 1); }

double sample_detector(const ImageView& image, const TrajectoryPoint& p);

// Position of grid index (ix, iy, iz) in the centred volume frame, expressed
// in detector pixels (x and z scale by voxel_size / pixel_x, y by
// voxel_size / pixel_y).
Vec3 grid_point(const Dims3& dims, double voxel_size, const DetectorSpec& det, double ix,
                double iy, double iz);

// Writes a P*P crop into `out` (row-major, length P*P).
void extract_patch_into(const ImageView& filtered_projection, const DetectorSpec& det,
                        const Vec3& r0, double theta, const PatchSpec& spec,
                        std::span<double> out);

std::vector<double> extract_patch(const ImageView& filtered_projection,
                                  const DetectorSpec& det, const Vec3& r0, double theta,
                                  const PatchSpec& spec);

// Requires a filtered series.
PatchStack extract_patch_stack(const TiltSeries& tilt_series, const Vec3& r0,
                               const PatchSpec& spec);

}  // namespace loctomo
