#pragma once

#include <cstddef>
#include <vector>

#include "ihfood/volume.hpp"

namespace ihfood {

// Intensity histogram of a preprocessed volume: probability mass per bin
// over m uniform bins spanning [0, 1].
struct Embedding {
  std::vector<double> values;
  std::vector<double> bin_edges;

  std::size_t bins() const noexcept { return values.size(); }
};

// Bins are half-open [edge_i, edge_{i+1}) except the last, which is closed.
// Throws PreconditionError when any voxel lies outside [0, 1] or m == 0.
Embedding histogram(const Volume& v, std::size_t m);

std::vector<double> uniform_bin_edges(std::size_t m);

}  // namespace ihfood
