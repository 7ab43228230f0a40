#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "oodbench/volume.hpp"

// NIfTI-1 single-file (.nii / .nii.gz) reading and writing.
//
// Supported datatypes are uint8 (2), int16 (4) and float32 (16). Everything
// written here is float32 except label volumes (uint8, or int16 above 255
// classes). 4D files carry one 3D volume per index of the 4th dimension; for
// probability fields that index is the class.
namespace oodbench::nifti {

inline constexpr std::int32_t kHeaderSize = 348;
inline constexpr std::int32_t kVoxOffset = 352;

enum class Datatype : std::int16_t { uint8 = 2, int16 = 4, float32 = 16 };

struct Header {
  std::array<std::int16_t, 8> dim{};
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  std::array<float, 8> pixdim{};
  float vox_offset = 0.0f;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::uint8_t xyzt_units = 0;
  Orientation orientation;
  std::array<char, 4> magic{};
  bool byte_swapped = false;

  std::size_t frames() const noexcept;  // product of dim[4..dim[0]]
};

/// Decoded file: values scaled to doubles, frame-major (frame * voxels + voxel).
struct Image {
  Header header;
  Grid grid;
  std::size_t frames = 1;
  std::vector<double> values;
};

Header read_header(const std::filesystem::path& path);
Image read_image(const std::filesystem::path& path);

ScalarVolume read_scalar(const std::filesystem::path& path);
LabelVolume read_labels(const std::filesystem::path& path, int num_classes);
/// One 4D file whose 4th dimension is the class index.
ProbVolume read_prob(const std::filesystem::path& path);
/// One 3D file per class.
ProbVolume read_prob(std::span<const std::filesystem::path> class_paths);
/// 4D file, one channel per 4th-dimension index.
std::vector<ScalarVolume> read_channels(const std::filesystem::path& path);

void write_scalar(const ScalarVolume& v, const std::filesystem::path& path, bool gzip);
void write_labels(const LabelVolume& v, const std::filesystem::path& path, bool gzip);
void write_prob(const ProbVolume& p, const std::filesystem::path& path, bool gzip);
void write_channels(std::span<const ScalarVolume> channels, const std::filesystem::path& path, bool gzip);

/// True when the path ends in ".gz".
bool wants_gzip(const std::filesystem::path& path);

}  // namespace oodbench::nifti
