#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "oodbench/volume.hpp"

// Image-level uncertainty scores for OOD detection. Every score is oriented
// so that higher means more out-of-distribution.
namespace oodbench::uq {

enum class UncertaintyKind { msp, variance };

/// Per-voxel uncertainty, non-negative.
struct VoxelUncertaintyMap {
  Grid grid;
  std::vector<double> values;
  UncertaintyKind kind = UncertaintyKind::msp;
};

/// 1 - max_c p_c per voxel; in [0, 1 - 1/C].
VoxelUncertaintyMap msp_uncertainty(const ProbVolume& p);

/// Streaming population variance across members (Welford), so a stack never
/// has to be held in memory. Identical members give exactly zero.
class VarianceAccumulator {
 public:
  VarianceAccumulator() = default;

  void add(const ProbVolume& member);
  /// Raw class-major member; avoids building a ProbVolume per member.
  void add(const Grid& grid, int num_classes, std::span<const double> probs);
  std::size_t count() const noexcept { return count_; }
  /// Mean over classes of the per-class population variance.
  VoxelUncertaintyMap finish() const;
  /// Member-mean probabilities (the consensus prediction).
  ProbVolume mean() const;

 private:
  Grid grid_;
  int classes_ = 0;
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

VoxelUncertaintyMap variance_uncertainty(const PredictionStack& stack);

/// Mean of the map over all voxels, or over mask > 0 when a mask is given.
double image_score(const VoxelUncertaintyMap& u, const LabelVolume* mask = nullptr);

/// Global average pooling: one component per channel.
Signature dum_signature(std::span<const ScalarVolume> channels, std::string source_id = {});

class ReferenceSignatureSet {
 public:
  ReferenceSignatureSet(std::vector<Signature> signatures, std::string dataset_id = {});

  std::size_t size() const noexcept { return signatures_.size(); }
  std::size_t dim() const noexcept { return signatures_.front().dim(); }
  std::span<const Signature> signatures() const noexcept { return signatures_; }
  const std::string& dataset_id() const noexcept { return dataset_id_; }

  /// CSV: header "source_id,f0,...,f{D-1}", one row per signature.
  void save_csv(const std::filesystem::path& path) const;
  static ReferenceSignatureSet load_csv(const std::filesystem::path& path);

 private:
  std::vector<Signature> signatures_;
  std::string dataset_id_;
};

struct Reducer {
  enum class Kind { mean, min, knn };
  Kind kind = Kind::mean;
  std::size_t k = 1;  // used by knn: mean of the k smallest distances

  static Reducer parse(std::string_view name, std::size_t k = 5);
  std::string name() const;
};

/// Euclidean distances to every reference, reduced.
double dum_score(const Signature& s, const ReferenceSignatureSet& refs, Reducer reducer = {});

enum class Method { msp, mc_variance, ensemble_variance, dum };
std::string_view to_string(Method m) noexcept;
Method parse_method(std::string_view name);

struct DumInputs {
  std::span<const ScalarVolume> channels;
  const ReferenceSignatureSet* refs = nullptr;
  Reducer reducer;
};

using MethodInputs = std::variant<const ProbVolume*, const PredictionStack*, DumInputs>;

/// Single image-level score for one method; throws Errc::usage on input/method mismatch.
double score_method(Method method, const MethodInputs& inputs, const LabelVolume* mask = nullptr);

}  // namespace oodbench::uq
