#include "ihfood/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ihfood/errors.hpp"

namespace ihfood {

std::vector<double> uniform_bin_edges(std::size_t m) {
  std::vector<double> edges(m + 1);
  for (std::size_t i = 0; i <= m; ++i) {
    edges[i] = static_cast<double>(i) / static_cast<double>(m);
  }
  edges[m] = 1.0;
  return edges;
}

Embedding histogram(const Volume& v, std::size_t m) {
  if (m == 0) throw PreconditionError("histogram requires at least one bin");
  if (v.empty()) throw PreconditionError("histogram of an empty volume");

  std::vector<std::size_t> counts(m, 0);
  const double scale = static_cast<double>(m);
  std::size_t outside = 0;
  for (float x : v.data()) {
    if (!(x >= 0.0f && x <= 1.0f)) {
      ++outside;
      continue;
    }
    const auto bin = static_cast<std::size_t>(static_cast<double>(x) * scale);
    ++counts[std::min(bin, m - 1)];
  }
  if (outside != 0) {
    throw PreconditionError("histogram input must be preprocessed to [0, 1]; " +
                            std::to_string(outside) + " voxels fall outside");
  }

  Embedding e;
  e.bin_edges = uniform_bin_edges(m);
  e.values.resize(m);
  const double total = static_cast<double>(v.size());
  for (std::size_t i = 0; i < m; ++i) e.values[i] = static_cast<double>(counts[i]) / total;
  return e;
}

}  // namespace ihfood
