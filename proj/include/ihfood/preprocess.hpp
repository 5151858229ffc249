#pragma once

#include <span>
#include <variant>

#include "ihfood/volume.hpp"

namespace ihfood {

// Clip intensities to a fixed [lo, hi] window (CT, Hounsfield units).
struct FixedWindow {
  double lo = -1350.0;
  double hi = 300.0;
  friend bool operator==(const FixedWindow&, const FixedWindow&) = default;
};

// Clip to per-image [p_lo, p_hi] percentiles (MRI).
struct PercentileWindow {
  double p_lo = 1.0;
  double p_hi = 99.0;
  friend bool operator==(const PercentileWindow&, const PercentileWindow&) = default;
};

using ClipMode = std::variant<FixedWindow, PercentileWindow>;

struct PreprocessConfig {
  Spacing target_spacing{1.0, 1.0, 1.5};
  ClipMode clip = PercentileWindow{};

  static PreprocessConfig ct();
  static PreprocessConfig mri();

  // Throws PreconditionError if the window or spacing is invalid.
  void validate() const;

  friend bool operator==(const PreprocessConfig&, const PreprocessConfig&) = default;
};

// Linear-interpolation percentile of `values` (inclusive endpoints; p in
// [0, 100]). Equivalent to numpy's default "linear" method.
double percentile(std::span<const float> values, double p);

// Trilinear resampling on voxel-center-aligned grids. Output shape along each
// axis is max(1, round(n * spacing / target)); samples outside the source
// grid clamp to the edge.
Volume resample(const Volume& v, const Spacing& target_spacing);

// Resample to a target shape; the output spacing is set to `spacing`.
Volume resample_to_shape(const Volume& v, const Shape& shape, const Spacing& spacing);

// Resample, clip, then min-max scale to [0, 1]. A constant image maps to 0.
Volume preprocess(const Volume& v, const PreprocessConfig& cfg);

}  // namespace ihfood
