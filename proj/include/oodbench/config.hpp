#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "oodbench/artifacts.hpp"
#include "oodbench/toy_model.hpp"
#include "oodbench/uq_scores.hpp"

// Benchmark configuration and its JSON form. Unknown keys are rejected so
// typos surface as configuration errors instead of silently using defaults.
namespace oodbench {

using Json = nlohmann::json;

struct FlavorConfig {
  std::string name;  // "binary", "multiclass", or any label
  toy::ToyModelConfig model;
  bool external = false;  // read predictions/features from manifest paths instead
};

struct ScoringOptions {
  std::size_t mc_samples = kDefaultMcSamples;
  std::size_t ensemble_members = 5;  // one member per independent training run
  uq::Reducer reducer{};
  bool use_mask = false;  // average over truth > 0 instead of the whole volume
};

struct BenchmarkConfig {
  std::uint64_t seed = 7;
  toy::PhantomSpec phantom{};
  std::size_t reference_cases = 20;
  std::size_t test_cases = 20;
  std::vector<artifacts::Spec> artifacts;  // seeds are overwritten per image
  std::vector<FlavorConfig> flavors;
  ScoringOptions scoring{};
  std::size_t runs = 5;
  std::vector<uq::Method> methods{uq::Method::msp, uq::Method::mc_variance, uq::Method::ensemble_variance,
                                  uq::Method::dum};
  bool self_control = true;  // add a byte-identical copy of the test set as a control dataset

  // For `eval`: existing datasets (paths relative to the config file).
  std::optional<std::filesystem::path> reference_manifest;
  std::optional<std::filesystem::path> test_manifest;
  std::vector<std::filesystem::path> ood_manifests;

  /// Defaults: 8 artifact kinds at default severity, binary + multiclass toy models.
  static BenchmarkConfig defaults();
};

Json to_json(const artifacts::Spec& spec);
artifacts::Spec artifact_from_json(const Json& j);

Json to_json(const toy::PhantomSpec& spec);
toy::PhantomSpec phantom_from_json(const Json& j, toy::PhantomSpec base = {});

Json to_json(const toy::ToyModelConfig& cfg);
toy::ToyModelConfig model_from_json(const Json& j, toy::ToyModelConfig base);

Json to_json(const BenchmarkConfig& cfg);
/// Missing keys keep their defaults; relative manifest paths resolve against base_dir.
BenchmarkConfig config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
BenchmarkConfig load_config(const std::filesystem::path& path);

}  // namespace oodbench
