#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "ihfood/volume.hpp"

namespace ihfood {

enum class CorruptionKind { local_noise, elastic, kspace_spikes, anisotropy, ghosting, random_motion };

inline constexpr std::array<CorruptionKind, 6> kAllCorruptionKinds{
    CorruptionKind::local_noise,   CorruptionKind::elastic,  CorruptionKind::kspace_spikes,
    CorruptionKind::anisotropy,    CorruptionKind::ghosting, CorruptionKind::random_motion};

std::string_view to_string(CorruptionKind kind) noexcept;
// Throws PreconditionError on an unknown name.
CorruptionKind corruption_kind_from_string(std::string_view name);

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::local_noise;
  int severity = 1;  // 1 (barely visible) .. 5 (gross)
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const CorruptionSpec&, const CorruptionSpec&) = default;
};

// Parses "kind=kspace_spikes,severity=3,seed=42". Seed defaults to 0.
CorruptionSpec parse_corruption_spec(std::string_view text);
std::string format_corruption_spec(const CorruptionSpec& spec);

// Magnitude table, linear in severity. Every constant is configurable.
struct CorruptionParams {
  // local_noise
  double cuboid_min_fraction = 0.10;
  double cuboid_max_fraction = 0.40;
  double noise_sigma_per_level = 0.04;
  double blur_sigma_per_level = 0.5;  // voxels
  double contrast_step_per_level = 0.15;
  // elastic
  std::size_t elastic_grid = 8;
  double elastic_sigma_per_level = 1.5;  // voxels
  // kspace_spikes
  std::size_t spikes_per_level = 2;
  double spike_magnitude_per_level = 0.01;  // fraction of |K(0)|
  // anisotropy: block factor = severity + offset
  int anisotropy_factor_offset = 1;
  // ghosting
  double ghost_alpha_per_level = 0.06;
  double ghost_shift_fraction = 0.25;
  // random_motion
  double motion_degrees_per_level = 2.0;
  double motion_translation_per_level = 0.5;  // voxels
};

struct CorruptionDiagnostics {
  // Largest |imag| left after the inverse FFT (kspace_spikes only).
  double max_imaginary = 0.0;
  // Which local_noise transform ran: "noise", "blur" or "contrast".
  std::string local_transform;
  // Axis chosen by anisotropy / ghosting.
  int axis = -1;
};

// Deterministic function of (v, spec, params). Shape and spacing are kept and
// the output is clipped to [0, 1]. Expects a preprocessed volume.
Volume corrupt(const Volume& v, const CorruptionSpec& spec, const CorruptionParams& params = {},
               CorruptionDiagnostics* diagnostics = nullptr);

}  // namespace ihfood
