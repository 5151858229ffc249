#include "ihfood/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ihfood/errors.hpp"

namespace ihfood {

PreprocessConfig PreprocessConfig::ct() { return {{1.0, 1.0, 1.5}, FixedWindow{}}; }

PreprocessConfig PreprocessConfig::mri() { return {{1.0, 1.0, 1.5}, PercentileWindow{}}; }

void PreprocessConfig::validate() const {
  validate_spacing(target_spacing);
  if (const auto* w = std::get_if<FixedWindow>(&clip)) {
    if (!(w->lo < w->hi) || !std::isfinite(w->lo) || !std::isfinite(w->hi)) {
      throw PreconditionError("fixed clip window requires finite lo < hi");
    }
  } else {
    const auto& p = std::get<PercentileWindow>(clip);
    if (!(0.0 <= p.p_lo && p.p_lo < p.p_hi && p.p_hi <= 100.0)) {
      throw PreconditionError("percentile window requires 0 <= p_lo < p_hi <= 100");
    }
  }
}

double percentile(std::span<const float> values, double p) {
  if (values.empty()) throw PreconditionError("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw PreconditionError("percentile must lie in [0, 100]");
  std::vector<float> sorted(values.begin(), values.end());
  const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(lo), sorted.end());
  const double a = sorted[lo];
  double b = a;
  if (hi != lo) {
    b = *std::min_element(sorted.begin() + static_cast<std::ptrdiff_t>(lo) + 1, sorted.end());
  }
  const double frac = pos - static_cast<double>(lo);
  return a + (b - a) * frac;
}

namespace {

// 1D linear interpolation along one axis, from `src` (shape in_shape) into a
// buffer whose extent along `axis` is `out_n`.
std::vector<float> resample_axis(const std::vector<float>& src, const Shape& in_shape, int axis,
                                 std::size_t out_n, Shape& out_shape) {
  const std::size_t in_n = in_shape[axis];
  out_shape = in_shape;
  out_shape[axis] = out_n;

  std::size_t outer = 1;
  for (int a = 0; a < axis; ++a) outer *= in_shape[a];
  std::size_t inner = 1;
  for (int a = axis + 1; a < 3; ++a) inner *= in_shape[a];

  std::vector<float> dst(outer * out_n * inner);
  if (out_n == in_n) {
    dst = src;
    return dst;
  }

  // Continuous source coordinate of each output voxel center.
  const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
  std::vector<std::size_t> i0(out_n), i1(out_n);
  std::vector<double> w(out_n);
  for (std::size_t j = 0; j < out_n; ++j) {
    double x = (static_cast<double>(j) + 0.5) * scale - 0.5;
    x = std::clamp(x, 0.0, static_cast<double>(in_n - 1));
    const auto lo = static_cast<std::size_t>(std::floor(x));
    i0[j] = lo;
    i1[j] = std::min(lo + 1, in_n - 1);
    w[j] = x - static_cast<double>(lo);
  }

  for (std::size_t o = 0; o < outer; ++o) {
    const float* s = src.data() + o * in_n * inner;
    float* d = dst.data() + o * out_n * inner;
    for (std::size_t j = 0; j < out_n; ++j) {
      const float* a = s + i0[j] * inner;
      const float* b = s + i1[j] * inner;
      float* out = d + j * inner;
      const double t = w[j];
      for (std::size_t r = 0; r < inner; ++r) {
        out[r] = static_cast<float>(a[r] + (static_cast<double>(b[r]) - a[r]) * t);
      }
    }
  }
  return dst;
}

}  // namespace

Volume resample_to_shape(const Volume& v, const Shape& shape, const Spacing& spacing) {
  validate_shape(shape);
  validate_spacing(spacing);
  std::vector<float> buf = v.values();
  Shape cur = v.shape();
  for (int axis = 0; axis < 3; ++axis) {
    Shape next;
    buf = resample_axis(buf, cur, axis, shape[axis], next);
    cur = next;
  }
  return Volume(cur, spacing, std::move(buf));
}

Volume resample(const Volume& v, const Spacing& target_spacing) {
  for (double t : target_spacing) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw PreconditionError("target spacing must be positive and finite");
    }
  }
  Shape out{};
  for (int a = 0; a < 3; ++a) {
    const double n = static_cast<double>(v.shape()[a]) * v.spacing()[a] / target_spacing[a];
    out[a] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n)));
  }
  return resample_to_shape(v, out, target_spacing);
}

Volume preprocess(const Volume& v, const PreprocessConfig& cfg) {
  cfg.validate();
  Volume out = v.spacing() == cfg.target_spacing ? v : resample(v, cfg.target_spacing);

  double lo = 0.0;
  double hi = 0.0;
  if (const auto* w = std::get_if<FixedWindow>(&cfg.clip)) {
    lo = w->lo;
    hi = w->hi;
  } else {
    const auto& p = std::get<PercentileWindow>(cfg.clip);
    lo = percentile(out.data(), p.p_lo);
    hi = percentile(out.data(), p.p_hi);
  }

  double mn = std::numeric_limits<double>::infinity();
  double mx = -mn;
  for (float& x : out.data()) {
    const double c = std::clamp(static_cast<double>(x), lo, hi);
    x = static_cast<float>(c);
    mn = std::min(mn, static_cast<double>(x));
    mx = std::max(mx, static_cast<double>(x));
  }
  if (!(mx > mn)) {
    std::fill(out.data().begin(), out.data().end(), 0.0f);
    return out;
  }
  const double range = mx - mn;
  for (float& x : out.data()) {
    x = static_cast<float>(std::clamp((x - mn) / range, 0.0, 1.0));
  }
  return out;
}

}  // namespace ihfood
