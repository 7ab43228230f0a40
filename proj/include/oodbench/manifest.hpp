#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oodbench/artifacts.hpp"
#include "oodbench/toy_model.hpp"

namespace oodbench {

enum class Role { id_reference, id_test, ood };
std::string_view to_string(Role role) noexcept;
Role parse_role(std::string_view name);

/// One 3D file per class, or a single 4D file.
using PredictionPaths = std::vector<std::filesystem::path>;

struct CaseEntry {
  std::string id;
  std::filesystem::path image;
  std::optional<std::filesystem::path> truth;
  PredictionPaths prediction;                 // for msp
  std::vector<PredictionPaths> mc_stack;      // for mc-variance
  std::vector<PredictionPaths> ensemble_stack;
  std::optional<std::filesystem::path> features;  // 4D, channel = 4th dim
  std::optional<std::uint64_t> artifact_seed;     // per-image seed actually used
};

/// A dataset on disk. Paths are held resolved against the manifest directory
/// and written back relative to it.
struct DatasetManifest {
  std::string dataset_id;
  Role role = Role::ood;
  std::string provenance;
  int truth_classes = toy::kPhantomClasses;
  int lesion_class = toy::kPhantomLesion;
  std::optional<artifacts::Spec> artifact;
  std::vector<CaseEntry> cases;

  /// Parses and checks that every referenced path exists.
  static DatasetManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

/// Throws Errc::config when reference and test share an image.
void check_disjoint(const DatasetManifest& reference, const DatasetManifest& test);

}  // namespace oodbench
