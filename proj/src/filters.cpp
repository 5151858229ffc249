#include "filters.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ihfood::detail {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const auto radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

}  // namespace

void gaussian_blur(Volume& v, const std::array<double, 3>& sigma) {
  for (int axis = 0; axis < 3; ++axis) {
    if (!(sigma[axis] > 0.0)) continue;
    const auto kernel = gaussian_kernel(sigma[axis]);
    const int radius = static_cast<int>(kernel.size() / 2);
    const auto n = static_cast<std::ptrdiff_t>(v.shape()[axis]);
    const std::size_t stride = v.stride(axis);
    std::vector<double> line(static_cast<std::size_t>(n));

    // Every line along `axis` starts at an index whose coordinate on that axis is 0.
    for (std::size_t start = 0; start < v.size(); ++start) {
      if ((start / stride) % static_cast<std::size_t>(n) != 0) continue;
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        line[static_cast<std::size_t>(i)] = v.data()[start + static_cast<std::size_t>(i) * stride];
      }
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int t = -radius; t <= radius; ++t) {
          const auto src = std::clamp<std::ptrdiff_t>(i + t, 0, n - 1);
          acc += kernel[static_cast<std::size_t>(t + radius)] * line[static_cast<std::size_t>(src)];
        }
        v.data()[start + static_cast<std::size_t>(i) * stride] = static_cast<float>(acc);
      }
    }
  }
}

double sample_trilinear(const Volume& v, double x, double y, double z) noexcept {
  const auto& s = v.shape();
  const std::array<double, 3> p{x, y, z};
  std::array<std::size_t, 3> lo{}, hi{};
  std::array<double, 3> w{};
  for (int a = 0; a < 3; ++a) {
    const double c = std::clamp(p[a], 0.0, static_cast<double>(s[a] - 1));
    lo[a] = static_cast<std::size_t>(std::floor(c));
    hi[a] = std::min(lo[a] + 1, s[a] - 1);
    w[a] = c - static_cast<double>(lo[a]);
  }
  double acc = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    const std::size_t i = (corner & 4) ? hi[0] : lo[0];
    const std::size_t j = (corner & 2) ? hi[1] : lo[1];
    const std::size_t k = (corner & 1) ? hi[2] : lo[2];
    const double wt = ((corner & 4) ? w[0] : 1.0 - w[0]) * ((corner & 2) ? w[1] : 1.0 - w[1]) *
                      ((corner & 1) ? w[2] : 1.0 - w[2]);
    if (wt != 0.0) acc += wt * v.at(i, j, k);
  }
  return acc;
}

void clip_unit(Volume& v) noexcept {
  for (float& x : v.data()) x = std::clamp(x, 0.0f, 1.0f);
}

}  // namespace ihfood::detail
