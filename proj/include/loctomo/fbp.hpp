#pragma once

#include <vector>

#include "loctomo/geometry.hpp"
#include "loctomo/volume.hpp"

namespace loctomo {

enum class FilterWindow { ramp, cosine_ramp };

struct FilterSpec {
  FilterWindow window = FilterWindow::cosine_ramp;
  int pad_factor = 2;

  void validate() const;
};

// Frequency response at f cycles/pixel (Nyquist = 0.5). Unit-slope ramp.
double filter_response(FilterWindow window, double f);

// Row-wise (u axis) filtering through a zero-padded FFT of length
// pad_factor * width. Output is flagged filtered.
TiltSeries filter_tilt_series(const TiltSeries& tilt_series, const FilterSpec& spec);

enum class AngularWeights {
  uniform,  // pi / N for every tilt
  gap       // half the angular gap to each neighbour, edges mirrored
};

std::vector<double> quadrature_weights(const std::vector<double>& angles, AngularWeights scheme);

Volume backproject(const TiltSeries& filtered, const Dims3& out_dims, double voxel_size,
                   AngularWeights scheme = AngularWeights::uniform);

Volume fbp(const TiltSeries& tilt_series, const FilterSpec& spec, const Dims3& out_dims,
           double voxel_size, AngularWeights scheme = AngularWeights::uniform);

// Scales the series to unit standard deviation (global over all pixels).
// A constant-zero series is returned unchanged.
TiltSeries normalize_unit_std(const TiltSeries& tilt_series);

}  // namespace loctomo
