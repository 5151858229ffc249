#include "ihfood/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "filters.hpp"
#include "ihfood/rng.hpp"

namespace ihfood {

Volume make_phantom(std::uint64_t seed, const PhantomConfig& cfg) {
  Rng rng(seed);
  const auto [ni, nj, nk] = cfg.shape;
  const std::array<double, 3> n{static_cast<double>(ni), static_cast<double>(nj),
                                static_cast<double>(nk)};

  std::array<double, 3> body_center{}, body_radius{}, insert_center{}, insert_radius{};
  for (int a = 0; a < 3; ++a) {
    body_center[a] = 0.5 * (n[a] - 1.0) + rng.uniform(-0.03, 0.03) * n[a];
    body_radius[a] = rng.uniform(0.36, 0.42) * n[a];
  }
  for (int a = 0; a < 3; ++a) {
    insert_radius[a] = rng.uniform(0.08, 0.12) * n[a];
    insert_center[a] = body_center[a] + rng.uniform(-0.35, 0.35) * body_radius[a];
  }

  Volume field(cfg.shape, cfg.spacing);
  for (float& x : field.data()) x = static_cast<float>(rng.normal());
  detail::gaussian_blur(field, {cfg.texture_sigma, cfg.texture_sigma, cfg.texture_sigma});
  double sq = 0.0;
  for (float x : field.data()) sq += static_cast<double>(x) * x;
  const double field_std = std::sqrt(sq / static_cast<double>(field.size()));
  const double field_scale = field_std > 0.0 ? cfg.texture_amplitude / field_std : 0.0;

  auto inside = [](const std::array<double, 3>& p, const std::array<double, 3>& c,
                   const std::array<double, 3>& r) {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) s += ((p[a] - c[a]) / r[a]) * ((p[a] - c[a]) / r[a]);
    return s;
  };

  Volume out(cfg.shape, cfg.spacing);
  for (std::size_t i = 0; i < ni; ++i) {
    for (std::size_t j = 0; j < nj; ++j) {
      for (std::size_t k = 0; k < nk; ++k) {
        const std::array<double, 3> p{static_cast<double>(i), static_cast<double>(j),
                                      static_cast<double>(k)};
        double value = cfg.background;
        if (inside(p, body_center, body_radius) <= 1.0) {
          value = cfg.tissue + field_scale * field.at(i, j, k);
          if (inside(p, insert_center, insert_radius) <= 1.0) value = cfg.insert;
        }
        out.at(i, j, k) = static_cast<float>(value);
      }
    }
  }
  detail::gaussian_blur(out, {0.7, 0.7, 0.7});
  for (float& x : out.data()) {
    x = static_cast<float>(std::abs(x + cfg.noise * rng.normal()));
  }
  return out;
}

Volume phantom_probability_map(const Volume& preprocessed, std::uint64_t seed) {
  Rng rng(seed);
  Volume out(preprocessed.shape(), preprocessed.spacing());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double logit = 25.0 * (preprocessed.data()[i] - 0.75) + 0.5 * rng.normal();
    out.data()[i] = static_cast<float>(1.0 / (1.0 + std::exp(-logit)));
  }
  return out;
}

}  // namespace ihfood
