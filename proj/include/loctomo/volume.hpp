#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "loctomo/errors.hpp"

namespace loctomo {

struct Dims3 {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  bool operator==(const Dims3&) const = default;
};

// Dense 3-D density grid, x fastest: index = x + nx * (y + ny * z).
class Volume {
 public:
  Volume() = default;
  Volume(Dims3 dims, double voxel_size = 1.0);
  Volume(Dims3 dims, double voxel_size, std::vector<double> data);

  const Dims3& dims() const { return dims_; }
  double voxel_size() const { return voxel_size_; }
  void set_voxel_size(double v);

  std::size_t size() const { return data_.size(); }
  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims_.nx) *
               (static_cast<std::size_t>(y) +
                static_cast<std::size_t>(dims_.ny) * static_cast<std::size_t>(z));
  }
  double& at(int x, int y, int z) { return data_[index(x, y, z)]; }
  double at(int x, int y, int z) const { return data_[index(x, y, z)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }

  // Trilinear interpolation at fractional index coordinates; neighbours
  // outside the grid count as zero.
  double trilinear(double x, double y, double z) const;

  // Throws InvalidArgument on non-finite entries.
  void check_finite() const;

 private:
  Dims3 dims_{};
  double voxel_size_ = 1.0;
  std::vector<double> data_;
};

// Read-only view of one 2-D image, column (u) fastest.
struct ImageView {
  std::span<const double> data;
  int width = 0;
  int height = 0;

  double at(int col, int row) const {
    return data[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(col)];
  }
};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h),
        data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  double& at(int col, int row) {
    return data[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(col)];
  }
  ImageView view() const { return {data, width, height}; }
};

}  // namespace loctomo
