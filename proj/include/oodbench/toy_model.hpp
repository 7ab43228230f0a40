#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oodbench/volume.hpp"

// Training-free stand-ins for the segmentation network and the in-distribution
// data: a seeded brain phantom generator, a prototype-softmax segmenter, and a
// fixed filter bank playing the role of penultimate-layer features.
namespace oodbench::toy {

// Phantom label scheme.
inline constexpr int kPhantomClasses = 4;
inline constexpr int kPhantomBackground = 0;
inline constexpr int kPhantomOuterTissue = 1;
inline constexpr int kPhantomInnerTissue = 2;
inline constexpr int kPhantomLesion = 3;

struct PhantomSpec {
  Shape shape{32, 32, 32};
  Spacing spacing{};
  // background, outer tissue, inner tissue, lesion
  std::array<double, 4> means{0.0, 80.0, 120.0, 200.0};
  std::array<double, 4> stds{0.0, 4.0, 4.0, 6.0};
  int lesion_count_min = 1;
  int lesion_count_max = 4;
  double lesion_radius_min = 1.5;
  double lesion_radius_max = 3.0;
  double head_fraction = 0.35;      // head semi-axis / extent, per axis
  double shape_jitter = 0.015;      // +- on head_fraction, per case
  double intensity_jitter = 0.03;   // +- relative global gain, per case
  std::uint64_t seed = 0;
};

void check(const PhantomSpec& spec);

struct Lesion {
  std::array<double, 3> center{};  // voxel coordinates (integers)
  double radius = 0.0;
};

struct Phantom {
  ScalarVolume image;
  LabelVolume labels;
  std::vector<Lesion> lesions;
};

Phantom make_phantom(const PhantomSpec& spec);

struct ToyModelConfig {
  std::vector<double> prototypes;  // one intensity per class; class 0 is background
  int lesion_class = 1;
  double temperature = 200.0;      // softmax temperature on squared distance
  double smoothing = 0.75;         // Gaussian sigma in voxels before classification
  double perturbation = 4.0;       // std of the per-class prototype jitter
  double feature_sigma = 1.0;      // base scale of the feature filter bank

  int num_classes() const noexcept { return static_cast<int>(prototypes.size()); }

  /// C = 2: non-lesion tissue vs lesion.
  static ToyModelConfig binary();
  /// C = 8: background, six intensity bands, lesion.
  static ToyModelConfig multiclass();
};

void check(const ToyModelConfig& cfg);

/// Prototypes jittered by perturbation * N(0, 1), one draw per class.
std::vector<double> jittered_prototypes(const ToyModelConfig& cfg, std::uint64_t seed);

/// Softmax over -(I - prototype_c)^2 / temperature of an already smoothed volume.
ProbVolume classify(const ScalarVolume& smoothed, std::span<const double> prototypes, double temperature);
/// Same values into a caller-owned class-major buffer of C x N.
void classify_into(const ScalarVolume& smoothed, std::span<const double> prototypes, double temperature,
                   std::span<double> probs);

/// Smooth, then classify; with a perturb seed the prototypes are jittered first.
ProbVolume segment(const ScalarVolume& v, const ToyModelConfig& cfg,
                   std::optional<std::uint64_t> perturb_seed = std::nullopt);

inline constexpr std::size_t kFeatureChannels = 8;

/// Filter bank at two scales: identity, Gaussian blur, gradient magnitude,
/// Laplacian magnitude (rectified, like post-activation features). Scale 1 works on the input; scale 2 on its 2x2x2 block means
/// with doubled blur width and difference step.
std::vector<ScalarVolume> features(const ScalarVolume& v, const ToyModelConfig& cfg);

// Filters used by the model.

/// Normalized, truncated at ceil(3 sigma). sigma = 0 gives {1}.
std::vector<double> gaussian_kernel(double sigma);
ScalarVolume gaussian_blur(const ScalarVolume& v, double sigma);
ScalarVolume gradient_magnitude(const ScalarVolume& v, std::size_t step = 1);
ScalarVolume laplacian(const ScalarVolume& v, std::size_t step = 1);
ScalarVolume block_mean(const ScalarVolume& v, std::size_t block);

}  // namespace oodbench::toy
