#pragma once

#include <cstdint>

#include "ihfood/volume.hpp"

namespace ihfood {

struct PhantomConfig {
  Shape shape{64, 64, 64};
  Spacing spacing{1.0, 1.0, 1.5};
  double background = 20.0;
  double tissue = 400.0;
  double texture_amplitude = 60.0;
  double texture_sigma = 3.0;  // voxels
  double insert = 800.0;
  double noise = 8.0;
};

// Seeded synthetic MRI-like volume: an ellipsoidal body filled with a smooth
// Gaussian random field, a bright ellipsoid insert and mild acquisition
// noise. Intensities are in arbitrary scanner units (not preprocessed).
Volume make_phantom(std::uint64_t seed, const PhantomConfig& cfg = {});

// Stand-in for a segmentation network's foreground probabilities on a
// preprocessed phantom: a soft threshold on intensity plus seeded jitter.
Volume phantom_probability_map(const Volume& preprocessed, std::uint64_t seed);

}  // namespace ihfood
