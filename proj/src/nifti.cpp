#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ihfood/errors.hpp"
#include "ihfood/volume.hpp"

namespace ihfood {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDimOffset = 40;
constexpr std::size_t kDatatypeOffset = 70;
constexpr std::size_t kBitpixOffset = 72;
constexpr std::size_t kPixdimOffset = 76;
constexpr std::size_t kVoxOffsetOffset = 108;
constexpr std::size_t kSclSlopeOffset = 112;
constexpr std::size_t kSclInterOffset = 116;
constexpr std::size_t kMagicOffset = 344;

enum NiftiType : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kFloat32 = 16,
  kFloat64 = 64,
};

template <typename T>
T read_field(const std::vector<char>& buf, std::size_t offset, bool swap) {
  std::array<char, sizeof(T)> raw;
  std::memcpy(raw.data(), buf.data() + offset, sizeof(T));
  if (swap) std::reverse(raw.begin(), raw.end());
  T out;
  std::memcpy(&out, raw.data(), sizeof(T));
  return out;
}

template <typename T>
void write_field(std::vector<char>& buf, std::size_t offset, T value) {
  std::memcpy(buf.data() + offset, &value, sizeof(T));
}

template <typename T>
double element(const char* p, bool swap) {
  std::array<char, sizeof(T)> raw;
  std::memcpy(raw.data(), p, sizeof(T));
  if (swap) std::reverse(raw.begin(), raw.end());
  T out;
  std::memcpy(&out, raw.data(), sizeof(T));
  return static_cast<double>(out);
}

}  // namespace

Volume read_nifti1(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> header(kHeaderSize);
  in.read(header.data(), kHeaderSize);
  if (in.gcount() != static_cast<std::streamsize>(kHeaderSize)) {
    throw FormatError(path.string() + ": truncated NIfTI-1 header");
  }
  if (static_cast<unsigned char>(header[0]) == 0x1f &&
      static_cast<unsigned char>(header[1]) == 0x8b) {
    throw FormatError(path.string() + ": gzip-compressed NIfTI is not supported");
  }

  bool swap = false;
  if (read_field<std::int32_t>(header, 0, false) != 348) {
    if (read_field<std::int32_t>(header, 0, true) != 348) {
      throw FormatError(path.string() + ": sizeof_hdr is not 348");
    }
    swap = true;
  }
  if (std::memcmp(header.data() + kMagicOffset, "n+1\0", 4) != 0) {
    throw FormatError(path.string() + ": magic is not \"n+1\" (only single-file NIfTI-1)");
  }

  std::array<std::int16_t, 8> dim{};
  for (std::size_t i = 0; i < 8; ++i) {
    dim[i] = read_field<std::int16_t>(header, kDimOffset + 2 * i, swap);
  }
  if (dim[0] < 1 || dim[0] > 7) {
    throw FormatError(path.string() + ": invalid dim[0] = " + std::to_string(dim[0]));
  }
  Shape shape{1, 1, 1};
  for (int d = 1; d <= dim[0]; ++d) {
    if (dim[d] < 1) throw FormatError(path.string() + ": non-positive dimension");
    if (d <= 3) {
      shape[d - 1] = static_cast<std::size_t>(dim[d]);
    } else if (dim[d] != 1) {
      throw FormatError(path.string() + ": " + std::to_string(dim[0]) +
                        "D image; only 3 spatial dimensions are supported");
    }
  }

  Spacing spacing{1.0, 1.0, 1.0};
  for (std::size_t i = 0; i < 3; ++i) {
    const float p = read_field<float>(header, kPixdimOffset + 4 * (i + 1), swap);
    if (static_cast<int>(i) < dim[0]) {
      if (!(p > 0.0f) || !std::isfinite(p)) {
        throw FormatError(path.string() + ": pixdim must be positive");
      }
      spacing[i] = p;
    }
  }

  const auto datatype = read_field<std::int16_t>(header, kDatatypeOffset, swap);
  std::size_t bytes_per = 0;
  switch (datatype) {
    case kUint8: bytes_per = 1; break;
    case kInt16: bytes_per = 2; break;
    case kFloat32: bytes_per = 4; break;
    case kFloat64: bytes_per = 8; break;
    default:
      throw FormatError(path.string() + ": unsupported NIfTI datatype " +
                        std::to_string(datatype));
  }

  const float vox_offset = read_field<float>(header, kVoxOffsetOffset, swap);
  const auto offset = static_cast<std::streamoff>(std::max(352.0f, vox_offset));
  const std::size_t n = voxel_count(shape);
  std::vector<char> payload(n * bytes_per);
  in.seekg(offset);
  in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (in.gcount() != static_cast<std::streamsize>(payload.size())) {
    throw DataError(path.string() + ": truncated voxel payload");
  }

  double slope = read_field<float>(header, kSclSlopeOffset, swap);
  double inter = read_field<float>(header, kSclInterOffset, swap);
  if (slope == 0.0 || !std::isfinite(slope)) {
    slope = 1.0;
    inter = 0.0;
  }
  if (!std::isfinite(inter)) inter = 0.0;

  // NIfTI stores x fastest; the Volume stores the last axis fastest.
  Volume v(shape, spacing);
  const auto [nx, ny, nz] = shape;
  std::size_t src = 0;
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t x = 0; x < nx; ++x, ++src) {
        const char* p = payload.data() + src * bytes_per;
        double value = 0.0;
        switch (datatype) {
          case kUint8: value = element<std::uint8_t>(p, false); break;
          case kInt16: value = element<std::int16_t>(p, swap); break;
          case kFloat32: value = element<float>(p, swap); break;
          default: value = element<double>(p, swap); break;
        }
        v.at(x, y, z) = static_cast<float>(value * slope + inter);
      }
    }
  }
  return v;
}

void write_nifti1(const Volume& v, const fs::path& path) {
  for (auto n : v.shape()) {
    if (n > 32767) throw PreconditionError("dimension too large for NIfTI-1");
  }
  std::vector<char> header(kHeaderSize + 4, 0);
  write_field<std::int32_t>(header, 0, 348);
  header[38] = 'r';
  const std::array<std::int16_t, 8> dim{3,
                                        static_cast<std::int16_t>(v.shape()[0]),
                                        static_cast<std::int16_t>(v.shape()[1]),
                                        static_cast<std::int16_t>(v.shape()[2]),
                                        1, 1, 1, 1};
  for (std::size_t i = 0; i < 8; ++i) write_field(header, kDimOffset + 2 * i, dim[i]);
  write_field<std::int16_t>(header, kDatatypeOffset, kFloat32);
  write_field<std::int16_t>(header, kBitpixOffset, 32);
  write_field<float>(header, kPixdimOffset, 1.0f);
  for (std::size_t i = 0; i < 3; ++i) {
    write_field(header, kPixdimOffset + 4 * (i + 1), static_cast<float>(v.spacing()[i]));
  }
  write_field<float>(header, kVoxOffsetOffset, 352.0f);
  write_field<float>(header, kSclSlopeOffset, 1.0f);
  header[123] = 2;  // xyzt_units: millimeters
  std::memcpy(header.data() + kMagicOffset, "n+1\0", 4);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  const auto [nx, ny, nz] = v.shape();
  std::vector<float> payload;
  payload.reserve(v.size());
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x) payload.push_back(v.at(x, y, z));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace ihfood
