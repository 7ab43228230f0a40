#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace oodbench {

// Geometry conventions of the registered-template setting.
inline constexpr std::array<std::size_t, 3> kTemplateShape{170, 204, 170};
inline constexpr double kTemplateSpacingMm = 1.0;
inline constexpr int kBinaryClasses = 2;       // background + lesion
inline constexpr int kMulticlassClasses = 8;   // background + 6 anatomical + lesion
inline constexpr std::size_t kDefaultMcSamples = 20;
inline constexpr double kProbSumTolerance = 1e-5;

struct Shape {
  std::size_t nx = 0, ny = 0, nz = 0;

  std::size_t voxels() const noexcept { return nx * ny * nz; }
  std::size_t operator[](int axis) const noexcept { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  bool operator==(const Shape&) const = default;
};

struct Spacing {
  double sx = 1.0, sy = 1.0, sz = 1.0;

  double operator[](int axis) const noexcept { return axis == 0 ? sx : axis == 1 ? sy : sz; }
  bool operator==(const Spacing&) const = default;
};

/// NIfTI orientation fields, carried through verbatim and never interpreted.
struct Orientation {
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  float qfac = 1.0f;
  std::array<float, 3> quatern{0.0f, 0.0f, 0.0f};
  std::array<float, 3> qoffset{0.0f, 0.0f, 0.0f};
  std::array<std::array<float, 4>, 3> srow{{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}}};

  bool operator==(const Orientation&) const = default;
};

struct Grid {
  Shape shape;
  Spacing spacing;
  Orientation orientation;

  std::size_t voxels() const noexcept { return shape.voxels(); }
  // x fastest, z slowest (NIfTI storage order).
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return x + shape.nx * (y + shape.ny * z);
  }
  /// Shape and spacing agree; orientation is metadata and not compared.
  bool same_lattice(const Grid& other) const noexcept {
    return shape == other.shape && spacing == other.spacing;
  }
};

Grid make_grid(Shape shape, Spacing spacing = {});

/// Real-valued 3D volume. Immutable after construction.
class ScalarVolume {
 public:
  ScalarVolume() = default;
  ScalarVolume(Grid grid, std::vector<double> data);

  const Grid& grid() const noexcept { return grid_; }
  const Shape& shape() const noexcept { return grid_.shape; }
  const Spacing& spacing() const noexcept { return grid_.spacing; }
  std::span<const double> data() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }

  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double at(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return data_[grid_.index(x, y, z)];
  }

  bool all_finite() const noexcept;

  /// Same grid, new values (checked for extent).
  ScalarVolume with_data(std::vector<double> data) const { return {grid_, std::move(data)}; }

  bool operator==(const ScalarVolume& other) const {
    return grid_.same_lattice(other.grid_) && data_ == other.data_;
  }

 private:
  Grid grid_;
  std::vector<double> data_;
};

/// Hard segmentation: class indices in [0, num_classes). Class 0 is background.
class LabelVolume {
 public:
  LabelVolume() = default;
  LabelVolume(Grid grid, std::vector<std::uint16_t> labels, int num_classes);

  const Grid& grid() const noexcept { return grid_; }
  const Shape& shape() const noexcept { return grid_.shape; }
  std::span<const std::uint16_t> labels() const noexcept { return labels_; }
  int num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::uint16_t operator[](std::size_t i) const noexcept { return labels_[i]; }

  std::size_t count(int class_id) const noexcept;

  bool operator==(const LabelVolume& other) const {
    return grid_.same_lattice(other.grid_) && num_classes_ == other.num_classes_ &&
           labels_ == other.labels_;
  }

 private:
  Grid grid_;
  std::vector<std::uint16_t> labels_;
  int num_classes_ = 0;
};

/// Per-voxel class probabilities, class-major: probs[c * voxels + voxel].
/// The constructor checks only the extent; value invariants are reported by validate().
class ProbVolume {
 public:
  ProbVolume() = default;
  ProbVolume(Grid grid, int num_classes, std::vector<double> probs);

  const Grid& grid() const noexcept { return grid_; }
  const Shape& shape() const noexcept { return grid_.shape; }
  int num_classes() const noexcept { return num_classes_; }
  std::size_t voxels() const noexcept { return grid_.voxels(); }
  std::span<const double> probs() const noexcept { return probs_; }
  std::span<const double> channel(int c) const noexcept {
    return std::span<const double>(probs_).subspan(static_cast<std::size_t>(c) * voxels(), voxels());
  }
  double at(int c, std::size_t voxel) const noexcept {
    return probs_[static_cast<std::size_t>(c) * voxels() + voxel];
  }

 private:
  Grid grid_;
  int num_classes_ = 0;
  std::vector<double> probs_;
};

struct Violation {
  enum class Kind { shape_mismatch, non_finite, out_of_range, sum_mismatch };
  Kind kind;
  std::size_t voxel = 0;
  std::string message;
};

/// First violated ProbVolume invariant, or nullopt when the field is valid.
std::optional<Violation> validate(const Grid& grid, int num_classes, std::span<const double> probs);
std::optional<Violation> validate(const ProbVolume& p);

/// Per-voxel argmax; ties go to the smallest class index.
LabelVolume argmax_labels(const ProbVolume& p);

/// One-hot encoding of a label volume as probabilities.
ProbVolume one_hot(const LabelVolume& labels);

/// T >= 2 probability fields for the same input (MC samples or ensemble members).
class PredictionStack {
 public:
  explicit PredictionStack(std::vector<ProbVolume> members);

  std::size_t size() const noexcept { return members_.size(); }
  const ProbVolume& operator[](std::size_t i) const noexcept { return members_[i]; }
  std::span<const ProbVolume> members() const noexcept { return members_; }
  int num_classes() const noexcept { return members_.front().num_classes(); }
  const Grid& grid() const noexcept { return members_.front().grid(); }

 private:
  std::vector<ProbVolume> members_;
};

/// Pooled feature vector of one volume.
class Signature {
 public:
  Signature(std::vector<double> features, std::string source_id = {});

  std::span<const double> features() const noexcept { return features_; }
  std::size_t dim() const noexcept { return features_.size(); }
  const std::string& source_id() const noexcept { return source_id_; }

 private:
  std::vector<double> features_;
  std::string source_id_;
};

}  // namespace oodbench
