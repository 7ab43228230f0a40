#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "oodbench/volume.hpp"

// Synthetic MRI corruptions. Every transform keeps shape and spacing, is a
// pure function of (input, spec), and draws randomness from its own stream
// keyed by (seed, kind).
namespace oodbench::artifacts {

enum class Kind { downsample, bias, motion, spikes, noise, ghost, truncation, scale };
inline constexpr std::array<Kind, 8> kAllKinds{Kind::downsample, Kind::bias,  Kind::motion,     Kind::spikes,
                                               Kind::noise,      Kind::ghost, Kind::truncation, Kind::scale};

std::string_view to_string(Kind kind) noexcept;
Kind parse_kind(std::string_view name);

enum class Axis { x = 0, y = 1, z = 2 };
std::string_view to_string(Axis axis) noexcept;
Axis parse_axis(std::string_view name);

struct DownsampleParams {
  double factor = 3.0;
  Axis axis = Axis::z;
};
struct BiasParams {
  int order = 3;
  double coeff_magnitude = 0.5;
};
struct MotionParams {
  int num_transforms = 2;
  double max_rotation_deg = 10.0;
  double max_translation_mm = 6.0;
};
struct SpikesParams {
  int num_spikes = 1;
  double intensity = 0.5;
};
struct NoiseParams {
  double std = 20.0;
};
struct GhostParams {
  int num_ghosts = 5;
  Axis axis = Axis::y;
  double intensity = 0.9;
};
struct TruncationParams {
  double max_fraction = 0.2;
};
struct ScaleParams {
  double factor = 1.25;
};

using Params = std::variant<DownsampleParams, BiasParams, MotionParams, SpikesParams, NoiseParams, GhostParams,
                            TruncationParams, ScaleParams>;

struct Spec {
  Params params;
  std::uint64_t seed = 0;

  Kind kind() const noexcept { return static_cast<Kind>(params.index()); }
};

/// Benchmark default severity for a kind (toolkit-chosen values).
Spec default_spec(Kind kind, std::uint64_t seed = 0);

/// Throws Error(Errc::parameter) when a severity parameter is outside its range.
void check(const Spec& spec);

ScalarVolume apply(const ScalarVolume& v, const Spec& spec);

// Individual transforms. The seed argument of deterministic kinds is accepted
// for uniformity and unused.
ScalarVolume downsample(const ScalarVolume& v, double factor, Axis axis, std::uint64_t seed = 0);
ScalarVolume bias(const ScalarVolume& v, int order, double coeff_magnitude, std::uint64_t seed);
ScalarVolume motion(const ScalarVolume& v, int num_transforms, double max_rotation_deg, double max_translation_mm,
                    std::uint64_t seed);
ScalarVolume spikes(const ScalarVolume& v, int num_spikes, double intensity, std::uint64_t seed);
ScalarVolume noise(const ScalarVolume& v, double std, std::uint64_t seed);
ScalarVolume ghost(const ScalarVolume& v, int num_ghosts, Axis axis, double intensity, std::uint64_t seed = 0);
ScalarVolume truncation(const ScalarVolume& v, double max_fraction, std::uint64_t seed);
ScalarVolume scale(const ScalarVolume& v, double factor, std::uint64_t seed = 0);

// Building blocks, exposed for explicit-parameter use and testing.

/// Number of monomials x^i y^j z^k with i + j + k <= order.
std::size_t bias_term_count(int order);
/// Coefficients in (i, j, k) lexicographic order, uniform in [-m, m].
std::vector<double> bias_coefficients(int order, double coeff_magnitude, std::uint64_t seed);
/// Multiplies by exp(P) with P the polynomial over coordinates normalized to [-1, 1].
ScalarVolume apply_bias_field(const ScalarVolume& v, int order, std::span<const double> coefficients);

struct RigidMotion {
  std::array<double, 3> rotation_deg{0, 0, 0};  // about x, y, z; applied as Rz * Ry * Rx
  std::array<double, 3> translation_mm{0, 0, 0};
};

std::vector<RigidMotion> sample_motions(int num_transforms, double max_rotation_deg, double max_translation_mm,
                                        std::uint64_t seed);
/// The volume moved rigidly about its center; trilinear, edge-clamped.
ScalarVolume move_rigid(const ScalarVolume& v, const RigidMotion& m);
/// Stitches k-space bands along z (centered order): band 0 from v, band b from copy b.
ScalarVolume motion_from_transforms(const ScalarVolume& v, std::span<const RigidMotion> transforms);
/// Contiguous band [first, last) of centered z-lines assigned to position b of bands.
std::pair<std::size_t, std::size_t> motion_band(std::size_t b, std::size_t bands, std::size_t nz);

struct KSpaceSpike {
  std::array<std::size_t, 3> bin{0, 0, 0};
  std::complex<double> value;
};
ScalarVolume add_kspace_spikes(const ScalarVolume& v, std::span<const KSpaceSpike> spikes);

}  // namespace oodbench::artifacts
