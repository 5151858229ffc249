#include "ihfood/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <vector>

#include <fftw3.h>

#include "filters.hpp"
#include "ihfood/errors.hpp"
#include "ihfood/rng.hpp"

namespace ihfood {

namespace {

constexpr std::array<std::string_view, 6> kKindNames{
    "local_noise", "elastic", "kspace_spikes", "anisotropy", "ghosting", "random_motion"};

// FFTW planning is not thread-safe; execution is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct Box {
  std::array<std::size_t, 3> lo{};
  std::array<std::size_t, 3> hi{};  // exclusive
  bool contains(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return i >= lo[0] && i < hi[0] && j >= lo[1] && j < hi[1] && k >= lo[2] && k < hi[2];
  }
};

Volume local_noise(const Volume& v, int severity, Rng& rng, const CorruptionParams& p,
                   CorruptionDiagnostics* diag) {
  Box box;
  for (int a = 0; a < 3; ++a) {
    const std::size_t n = v.shape()[a];
    const double frac = rng.uniform(p.cuboid_min_fraction, p.cuboid_max_fraction);
    const auto len = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(frac * static_cast<double>(n))), 1, n);
    box.lo[a] = static_cast<std::size_t>(rng.below(n - len + 1));
    box.hi[a] = box.lo[a] + len;
  }
  const auto choice = rng.below(3);
  const double s = severity;
  Volume out = v;
  const auto [ni, nj, nk] = v.shape();

  if (choice == 0) {
    if (diag) diag->local_transform = "noise";
    const double sigma = p.noise_sigma_per_level * s;
    for (std::size_t i = box.lo[0]; i < box.hi[0]; ++i)
      for (std::size_t j = box.lo[1]; j < box.hi[1]; ++j)
        for (std::size_t k = box.lo[2]; k < box.hi[2]; ++k)
          out.at(i, j, k) = static_cast<float>(out.at(i, j, k) + sigma * rng.normal());
  } else if (choice == 1) {
    if (diag) diag->local_transform = "blur";
    Volume blurred = v;
    const double sigma = p.blur_sigma_per_level * s;
    detail::gaussian_blur(blurred, {sigma, sigma, sigma});
    for (std::size_t i = 0; i < ni; ++i)
      for (std::size_t j = 0; j < nj; ++j)
        for (std::size_t k = 0; k < nk; ++k)
          if (box.contains(i, j, k)) out.at(i, j, k) = blurred.at(i, j, k);
  } else {
    if (diag) diag->local_transform = "contrast";
    const double sign = rng.below(2) == 0 ? -1.0 : 1.0;
    const double factor = 1.0 + sign * p.contrast_step_per_level * s;
    double mean = 0.0;
    std::size_t count = 0;
    for (std::size_t i = box.lo[0]; i < box.hi[0]; ++i)
      for (std::size_t j = box.lo[1]; j < box.hi[1]; ++j)
        for (std::size_t k = box.lo[2]; k < box.hi[2]; ++k, ++count) mean += v.at(i, j, k);
    mean /= static_cast<double>(count);
    for (std::size_t i = box.lo[0]; i < box.hi[0]; ++i)
      for (std::size_t j = box.lo[1]; j < box.hi[1]; ++j)
        for (std::size_t k = box.lo[2]; k < box.hi[2]; ++k)
          out.at(i, j, k) = static_cast<float>(mean + factor * (v.at(i, j, k) - mean));
  }
  return out;
}

// Linear interpolation weights from a grid of `g` control points spread
// corner-to-corner over `n` voxels.
struct ControlAxis {
  std::vector<std::size_t> lo, hi;
  std::vector<double> w;
};

ControlAxis control_axis(std::size_t n, std::size_t g) {
  ControlAxis ax;
  ax.lo.resize(n);
  ax.hi.resize(n);
  ax.w.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0
                            : static_cast<double>(i) * static_cast<double>(g - 1) /
                                  static_cast<double>(n - 1);
    const auto lo = std::min(static_cast<std::size_t>(std::floor(t)), g - 1);
    ax.lo[i] = lo;
    ax.hi[i] = std::min(lo + 1, g - 1);
    ax.w[i] = t - static_cast<double>(lo);
  }
  return ax;
}

Volume elastic(const Volume& v, int severity, Rng& rng, const CorruptionParams& p) {
  const std::size_t g = std::max<std::size_t>(2, p.elastic_grid);
  const double sigma = p.elastic_sigma_per_level * severity;
  // control[(a*g + b)*g + c][component]
  std::vector<std::array<double, 3>> control(g * g * g);
  for (auto& d : control) {
    for (double& c : d) c = sigma * rng.normal();
  }
  const auto [ni, nj, nk] = v.shape();
  const auto ax = control_axis(ni, g);
  const auto ay = control_axis(nj, g);
  const auto az = control_axis(nk, g);

  Volume out(v.shape(), v.spacing());
  for (std::size_t i = 0; i < ni; ++i) {
    for (std::size_t j = 0; j < nj; ++j) {
      for (std::size_t k = 0; k < nk; ++k) {
        std::array<double, 3> disp{0.0, 0.0, 0.0};
        for (int corner = 0; corner < 8; ++corner) {
          const std::size_t a = (corner & 4) ? ax.hi[i] : ax.lo[i];
          const std::size_t b = (corner & 2) ? ay.hi[j] : ay.lo[j];
          const std::size_t c = (corner & 1) ? az.hi[k] : az.lo[k];
          const double wt = ((corner & 4) ? ax.w[i] : 1.0 - ax.w[i]) *
                            ((corner & 2) ? ay.w[j] : 1.0 - ay.w[j]) *
                            ((corner & 1) ? az.w[k] : 1.0 - az.w[k]);
          const auto& d = control[(a * g + b) * g + c];
          for (int q = 0; q < 3; ++q) disp[q] += wt * d[q];
        }
        out.at(i, j, k) = static_cast<float>(detail::sample_trilinear(
            v, static_cast<double>(i) + disp[0], static_cast<double>(j) + disp[1],
            static_cast<double>(k) + disp[2]));
      }
    }
  }
  return out;
}

Volume kspace_spikes(const Volume& v, int severity, Rng& rng, const CorruptionParams& p,
                     CorruptionDiagnostics* diag) {
  const auto [ni, nj, nk] = v.shape();
  const std::size_t n = v.size();
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (buf == nullptr) throw std::bad_alloc();
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  {
    std::lock_guard lock(fftw_planner_mutex());
    forward = fftw_plan_dft_3d(static_cast<int>(ni), static_cast<int>(nj), static_cast<int>(nk),
                               buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    backward = fftw_plan_dft_3d(static_cast<int>(ni), static_cast<int>(nj), static_cast<int>(nk),
                                buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < n; ++i) {
    buf[i][0] = v.data()[i];
    buf[i][1] = 0.0;
  }
  fftw_execute(forward);

  const double dc = std::hypot(buf[0][0], buf[0][1]);
  const double magnitude = p.spike_magnitude_per_level * severity * dc;
  const std::size_t spikes = p.spikes_per_level * static_cast<std::size_t>(severity);
  auto self_conjugate = [](std::size_t c, std::size_t len) { return c == 0 || 2 * c == len; };
  const bool has_spike_site = !(ni <= 2 && nj <= 2 && nk <= 2);
  for (std::size_t s = 0; s < spikes && has_spike_site; ++s) {
    std::size_t a = 0, b = 0, c = 0;
    do {
      a = static_cast<std::size_t>(rng.below(ni));
      b = static_cast<std::size_t>(rng.below(nj));
      c = static_cast<std::size_t>(rng.below(nk));
    } while (self_conjugate(a, ni) && self_conjugate(b, nj) && self_conjugate(c, nk));
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double re = magnitude * std::cos(phase);
    const double im = magnitude * std::sin(phase);
    const std::size_t at = (a * nj + b) * nk + c;
    const std::size_t mirror =
        (((ni - a) % ni) * nj + (nj - b) % nj) * nk + (nk - c) % nk;
    buf[at][0] += re;
    buf[at][1] += im;
    buf[mirror][0] += re;
    buf[mirror][1] -= im;
  }

  fftw_execute(backward);
  Volume out(v.shape(), v.spacing());
  double max_imag = 0.0;
  const double norm = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.data()[i] = static_cast<float>(buf[i][0] * norm);
    max_imag = std::max(max_imag, std::abs(buf[i][1] * norm));
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
  fftw_free(buf);
  if (diag) diag->max_imaginary = max_imag;
  return out;
}

Volume anisotropy(const Volume& v, int severity, Rng& rng, const CorruptionParams& p,
                  CorruptionDiagnostics* diag) {
  const int axis = static_cast<int>(rng.below(3));
  if (diag) diag->axis = axis;
  const std::size_t n = v.shape()[axis];
  const auto factor = static_cast<std::size_t>(std::max(1, severity + p.anisotropy_factor_offset));
  const std::size_t blocks = (n + factor - 1) / factor;
  const std::size_t stride = v.stride(axis);

  std::vector<double> centers(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * factor;
    const std::size_t hi = std::min(lo + factor, n);
    centers[b] = 0.5 * static_cast<double>(lo + hi - 1);
  }
  // For each fine index: bracketing blocks and weight toward the upper one.
  std::vector<std::size_t> b0(n), b1(n);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i);
    if (x <= centers.front()) {
      b0[i] = b1[i] = 0;
      w[i] = 0.0;
    } else if (x >= centers.back()) {
      b0[i] = b1[i] = blocks - 1;
      w[i] = 0.0;
    } else {
      std::size_t b = static_cast<std::size_t>(
          std::upper_bound(centers.begin(), centers.end(), x) - centers.begin());
      b0[i] = b - 1;
      b1[i] = b;
      w[i] = (x - centers[b - 1]) / (centers[b] - centers[b - 1]);
    }
  }

  Volume out = v;
  std::vector<double> coarse(blocks);
  for (std::size_t start = 0; start < v.size(); ++start) {
    if ((start / stride) % n != 0) continue;
    for (std::size_t b = 0; b < blocks; ++b) {
      const std::size_t lo = b * factor;
      const std::size_t hi = std::min(lo + factor, n);
      double sum = 0.0;
      for (std::size_t i = lo; i < hi; ++i) sum += v.data()[start + i * stride];
      coarse[b] = sum / static_cast<double>(hi - lo);
    }
    for (std::size_t i = 0; i < n; ++i) {
      out.data()[start + i * stride] =
          static_cast<float>(coarse[b0[i]] + (coarse[b1[i]] - coarse[b0[i]]) * w[i]);
    }
  }
  return out;
}

Volume ghosting(const Volume& v, int severity, Rng& rng, const CorruptionParams& p,
                CorruptionDiagnostics* diag) {
  const int axis = static_cast<int>(rng.below(3));
  if (diag) diag->axis = axis;
  const auto n = static_cast<std::ptrdiff_t>(v.shape()[axis]);
  const auto shift = static_cast<std::ptrdiff_t>(
      std::llround(static_cast<double>(n) * p.ghost_shift_fraction));
  const double alpha = p.ghost_alpha_per_level * severity;
  const auto stride = static_cast<std::ptrdiff_t>(v.stride(axis));

  Volume out(v.shape(), v.spacing());
  for (std::size_t idx = 0; idx < v.size(); ++idx) {
    const auto pos = static_cast<std::ptrdiff_t>(idx / static_cast<std::size_t>(stride)) % n;
    const auto base = static_cast<std::ptrdiff_t>(idx);
    double ghost = 0.0;
    if (pos - shift >= 0) ghost += v.data()[static_cast<std::size_t>(base - shift * stride)];
    if (pos + shift < n) ghost += v.data()[static_cast<std::size_t>(base + shift * stride)];
    out.data()[idx] = static_cast<float>((1.0 - alpha) * v.data()[idx] + 0.5 * alpha * ghost);
  }
  return out;
}

Volume random_motion(const Volume& v, int severity, Rng& rng, const CorruptionParams& p) {
  const int poses = 1 + severity;
  const auto [ni, nj, nk] = v.shape();
  const std::array<double, 3> center{0.5 * static_cast<double>(ni - 1),
                                     0.5 * static_cast<double>(nj - 1),
                                     0.5 * static_cast<double>(nk - 1)};
  std::vector<double> acc(v.size(), 0.0);
  for (int pose = 0; pose < poses; ++pose) {
    std::array<double, 3> axis{rng.normal(), rng.normal(), rng.normal()};
    double len = std::hypot(axis[0], axis[1], axis[2]);
    if (len == 0.0) {
      axis = {0.0, 0.0, 1.0};
      len = 1.0;
    }
    for (double& a : axis) a /= len;
    const double angle =
        rng.uniform(-1.0, 1.0) * p.motion_degrees_per_level * severity * std::numbers::pi / 180.0;
    std::array<double, 3> shift{};
    for (double& t : shift) t = rng.uniform(-1.0, 1.0) * p.motion_translation_per_level * severity;

    // Rodrigues rotation matrix.
    const double c = std::cos(angle), s = std::sin(angle), one_c = 1.0 - c;
    const auto [x, y, z] = axis;
    const double r[3][3] = {{c + x * x * one_c, x * y * one_c - z * s, x * z * one_c + y * s},
                            {y * x * one_c + z * s, c + y * y * one_c, y * z * one_c - x * s},
                            {z * x * one_c - y * s, z * y * one_c + x * s, c + z * z * one_c}};
    std::size_t idx = 0;
    for (std::size_t i = 0; i < ni; ++i) {
      for (std::size_t j = 0; j < nj; ++j) {
        for (std::size_t k = 0; k < nk; ++k, ++idx) {
          const double d[3] = {static_cast<double>(i) - center[0],
                               static_cast<double>(j) - center[1],
                               static_cast<double>(k) - center[2]};
          double src[3];
          for (int q = 0; q < 3; ++q) {
            src[q] = r[q][0] * d[0] + r[q][1] * d[1] + r[q][2] * d[2] + center[q] + shift[q];
          }
          acc[idx] += detail::sample_trilinear(v, src[0], src[1], src[2]);
        }
      }
    }
  }
  Volume out(v.shape(), v.spacing());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    out.data()[i] = static_cast<float>(acc[i] / poses);
  }
  return out;
}

}  // namespace

std::string_view to_string(CorruptionKind kind) noexcept {
  return kKindNames[static_cast<std::size_t>(kind)];
}

CorruptionKind corruption_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<CorruptionKind>(i);
  }
  throw PreconditionError("unknown corruption kind '" + std::string(name) + "'");
}

void CorruptionSpec::validate() const {
  if (severity < 1 || severity > 5) {
    throw PreconditionError("corruption severity must be in 1..5, got " +
                            std::to_string(severity));
  }
  if (static_cast<std::size_t>(kind) >= kKindNames.size()) {
    throw PreconditionError("unknown corruption kind");
  }
}

CorruptionSpec parse_corruption_spec(std::string_view text) {
  CorruptionSpec spec;
  bool have_kind = false;
  bool have_severity = false;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = text.substr(0, comma);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw PreconditionError("corruption spec item '" + std::string(item) + "' lacks '='");
    }
    const auto key = item.substr(0, eq);
    const auto value = item.substr(eq + 1);
    auto parse_int = [&](auto& out) {
      const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
      if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
        throw PreconditionError("invalid value for '" + std::string(key) + "': '" +
                                std::string(value) + "'");
      }
    };
    if (key == "kind") {
      spec.kind = corruption_kind_from_string(value);
      have_kind = true;
    } else if (key == "severity") {
      parse_int(spec.severity);
      have_severity = true;
    } else if (key == "seed") {
      parse_int(spec.seed);
    } else {
      throw PreconditionError("unknown corruption spec key '" + std::string(key) + "'");
    }
  }
  if (!have_kind || !have_severity) {
    throw PreconditionError("corruption spec needs kind=... and severity=...");
  }
  spec.validate();
  return spec;
}

std::string format_corruption_spec(const CorruptionSpec& spec) {
  return "kind=" + std::string(to_string(spec.kind)) + ",severity=" +
         std::to_string(spec.severity) + ",seed=" + std::to_string(spec.seed);
}

Volume corrupt(const Volume& v, const CorruptionSpec& spec, const CorruptionParams& params,
               CorruptionDiagnostics* diagnostics) {
  spec.validate();
  if (v.empty()) throw PreconditionError("cannot corrupt an empty volume");
  Rng rng(spec.seed);
  Volume out;
  switch (spec.kind) {
    case CorruptionKind::local_noise:
      out = local_noise(v, spec.severity, rng, params, diagnostics);
      break;
    case CorruptionKind::elastic:
      out = elastic(v, spec.severity, rng, params);
      break;
    case CorruptionKind::kspace_spikes:
      out = kspace_spikes(v, spec.severity, rng, params, diagnostics);
      break;
    case CorruptionKind::anisotropy:
      out = anisotropy(v, spec.severity, rng, params, diagnostics);
      break;
    case CorruptionKind::ghosting:
      out = ghosting(v, spec.severity, rng, params, diagnostics);
      break;
    case CorruptionKind::random_motion:
      out = random_motion(v, spec.severity, rng, params);
      break;
  }
  detail::clip_unit(out);
  return out;
}

}  // namespace ihfood
