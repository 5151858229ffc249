#include "ihfood/volume.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ihfood/errors.hpp"

namespace ihfood {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "rvol payload I/O assumes a little-endian host");

Volume::Volume(Shape shape, Spacing spacing, float fill)
    : shape_(shape), spacing_(spacing) {
  validate_shape(shape_);
  validate_spacing(spacing_);
  data_.assign(voxel_count(shape_), fill);
}

Volume::Volume(Shape shape, Spacing spacing, std::vector<float> data)
    : shape_(shape), spacing_(spacing), data_(std::move(data)) {
  validate_shape(shape_);
  validate_spacing(spacing_);
  if (data_.size() != voxel_count(shape_)) {
    throw PreconditionError("volume data length " + std::to_string(data_.size()) +
                            " does not match shape product " +
                            std::to_string(voxel_count(shape_)));
  }
}

std::size_t Volume::stride(int axis) const noexcept {
  switch (axis) {
    case 0: return shape_[1] * shape_[2];
    case 1: return shape_[2];
    default: return 1;
  }
}

void Volume::set_spacing(Spacing spacing) {
  validate_spacing(spacing);
  spacing_ = spacing;
}

std::size_t voxel_count(const Shape& shape) noexcept {
  return shape[0] * shape[1] * shape[2];
}

void validate_shape(const Shape& shape) {
  for (auto n : shape) {
    if (n < 1) throw PreconditionError("volume shape components must be >= 1");
  }
}

void validate_spacing(const Spacing& spacing) {
  for (double s : spacing) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw PreconditionError("spacing components must be positive and finite");
    }
  }
}

std::size_t count_non_finite(std::span<const float> data) noexcept {
  std::size_t bad = 0;
  for (float x : data) bad += !std::isfinite(x);
  return bad;
}

VolumeFormat format_from_path(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".nii") return VolumeFormat::nifti1;
  if (ext == ".json") return VolumeFormat::rvol;
  if (ext == ".gz") throw FormatError(path.string() + ": compressed NIfTI is not supported");
  throw FormatError(path.string() + ": cannot infer volume format from extension '" + ext + "'");
}

namespace {

template <typename T, std::size_t N>
std::array<T, N> json_array(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_array() || j.at(field).size() != N) {
    throw FormatError(std::string("rvol header: '") + field + "' must be an array of " +
                      std::to_string(N) + " numbers");
  }
  std::array<T, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    const auto& e = j.at(field)[i];
    if (!e.is_number()) {
      throw FormatError(std::string("rvol header: '") + field + "' entries must be numbers");
    }
    if constexpr (std::is_integral_v<T>) {
      if (!e.is_number_integer() || e.get<std::int64_t>() < 1) {
        throw FormatError(std::string("rvol header: '") + field +
                          "' entries must be positive integers");
      }
    }
    out[i] = e.get<T>();
  }
  return out;
}

Volume load_rvol(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json header;
  try {
    in >> header;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": invalid JSON header: " + e.what());
  }
  const auto shape = json_array<std::size_t, 3>(header, "shape");
  const auto spacing = json_array<double, 3>(header, "spacing");
  for (double s : spacing) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw FormatError(path.string() + ": spacing must be positive and finite");
    }
  }
  if (header.value("dtype", std::string("float32")) != "float32") {
    throw FormatError(path.string() + ": only dtype float32 is supported");
  }
  if (header.value("order", std::string("row-major")) != "row-major") {
    throw FormatError(path.string() + ": only row-major order is supported");
  }
  if (!header.contains("data") || !header.at("data").is_string()) {
    throw FormatError(path.string() + ": 'data' must name the raw payload file");
  }
  const fs::path raw = path.parent_path() / header.at("data").get<std::string>();

  const std::size_t n = voxel_count(shape);
  std::ifstream payload(raw, std::ios::binary | std::ios::ate);
  if (!payload) throw IoError("cannot open " + raw.string());
  const auto bytes = static_cast<std::size_t>(payload.tellg());
  if (bytes != n * sizeof(float)) {
    throw DataError(raw.string() + ": expected " + std::to_string(n * sizeof(float)) +
                    " bytes, found " + std::to_string(bytes));
  }
  payload.seekg(0);
  std::vector<float> data(n);
  payload.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(n * sizeof(float)));
  if (!payload) throw IoError("failed reading " + raw.string());
  return Volume(shape, spacing, std::move(data));
}

void save_rvol(const Volume& v, const fs::path& path) {
  fs::path json_path = path;
  if (json_path.extension() != ".json") json_path += ".json";
  fs::path raw_path = json_path;
  raw_path.replace_extension(".raw");

  json header;
  header["shape"] = {v.shape()[0], v.shape()[1], v.shape()[2]};
  header["spacing"] = {v.spacing()[0], v.spacing()[1], v.spacing()[2]};
  header["dtype"] = "float32";
  header["order"] = "row-major";
  header["data"] = raw_path.filename().string();

  std::ofstream raw(raw_path, std::ios::binary | std::ios::trunc);
  if (!raw) throw IoError("cannot write " + raw_path.string());
  raw.write(reinterpret_cast<const char*>(v.data().data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
  if (!raw) throw IoError("failed writing " + raw_path.string());

  std::ofstream out(json_path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + json_path.string());
  out << header.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + json_path.string());
}

}  // namespace

Volume load_volume(const fs::path& path, VolumeFormat format) {
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  Volume v = format == VolumeFormat::nifti1 ? read_nifti1(path) : load_rvol(path);
  if (const auto bad = count_non_finite(v.data()); bad != 0) {
    throw DataError(path.string() + ": " + std::to_string(bad) + " non-finite voxel values");
  }
  return v;
}

Volume load_volume(const fs::path& path) {
  return load_volume(path, format_from_path(path));
}

void save_volume(const Volume& v, const fs::path& path, VolumeFormat format) {
  if (format == VolumeFormat::nifti1) {
    write_nifti1(v, path);
  } else {
    save_rvol(v, path);
  }
}

}  // namespace ihfood
