#pragma once

#include <array>

#include "ihfood/volume.hpp"

namespace ihfood::detail {

// Separable Gaussian blur, sigma in voxels per axis (0 skips an axis).
// Borders clamp to the edge.
void gaussian_blur(Volume& v, const std::array<double, 3>& sigma);

// Trilinear sample at continuous voxel coordinates with edge clamping.
double sample_trilinear(const Volume& v, double x, double y, double z) noexcept;

void clip_unit(Volume& v) noexcept;

}  // namespace ihfood::detail
