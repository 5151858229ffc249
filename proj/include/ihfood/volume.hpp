#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace ihfood {

using Shape = std::array<std::size_t, 3>;
using Spacing = std::array<double, 3>;

// Dense 3D scalar grid. Storage is row-major over (i, j, k), i.e. the last
// axis is contiguous. Spacing is in millimeters per voxel along each axis.
class Volume {
 public:
  Volume() = default;
  Volume(Shape shape, Spacing spacing, float fill = 0.0f);
  Volume(Shape shape, Spacing spacing, std::vector<float> data);

  const Shape& shape() const noexcept { return shape_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  std::vector<float>& values() noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return (i * shape_[1] + j) * shape_[2] + k;
  }
  float& at(std::size_t i, std::size_t j, std::size_t k) noexcept {
    return data_[index(i, j, k)];
  }
  float at(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return data_[index(i, j, k)];
  }

  // Stride (in elements) between consecutive indices along `axis`.
  std::size_t stride(int axis) const noexcept;

  void set_spacing(Spacing spacing);

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  Shape shape_{0, 0, 0};
  Spacing spacing_{1.0, 1.0, 1.0};
  std::vector<float> data_;
};

std::size_t voxel_count(const Shape& shape) noexcept;

// Throws PreconditionError unless every component is >= 1 (shape) or
// positive and finite (spacing).
void validate_shape(const Shape& shape);
void validate_spacing(const Spacing& spacing);

// Number of non-finite voxels.
std::size_t count_non_finite(std::span<const float> data) noexcept;

enum class VolumeFormat { nifti1, rvol };

// Picks nifti1 for *.nii, rvol for *.json; throws FormatError otherwise.
VolumeFormat format_from_path(const std::filesystem::path& path);

// Loads a volume and casts it to float32. Rejects NaN/Inf with a DataError
// that names the offending count.
Volume load_volume(const std::filesystem::path& path, VolumeFormat format);
Volume load_volume(const std::filesystem::path& path);

// Writes `<stem>.json` + `<stem>.raw` next to `path` (which names the json).
void save_volume(const Volume& v, const std::filesystem::path& path,
                 VolumeFormat format = VolumeFormat::rvol);

// NIfTI-1 single-file (.nii) reader. Orientation is ignored; pixdim[1..3]
// become the spacing. Exposed separately for tests and tooling.
Volume read_nifti1(const std::filesystem::path& path);
void write_nifti1(const Volume& v, const std::filesystem::path& path);

}  // namespace ihfood
