#include "oodbench/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "oodbench/error.hpp"
#include "oodbench/fft.hpp"
#include "oodbench/random.hpp"

namespace oodbench::artifacts {

namespace {

constexpr std::uint64_t kStreamBase = 0x0a27'1f00'0000'0000ULL;

Rng stream(std::uint64_t seed, Kind kind) { return Rng(seed, kStreamBase + static_cast<std::uint64_t>(kind)); }

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::parameter, what);
}

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

ScalarVolume checked(ScalarVolume out, Kind kind) {
  if (!out.all_finite()) {
    throw Error(Errc::data, std::string(to_string(kind)) + " produced non-finite values");
  }
  return out;
}

// Trilinear interpolation at continuous index coordinates, indices clamped to the grid.
double sample_clamped(const ScalarVolume& v, double x, double y, double z) {
  const auto& s = v.shape();
  const double pos[3] = {x, y, z};
  std::size_t i0[3], i1[3];
  double t[3];
  for (int a = 0; a < 3; ++a) {
    const double hi = static_cast<double>(s[a] - 1);
    const double p = std::clamp(pos[a], 0.0, hi);
    const double f = std::floor(p);
    i0[a] = static_cast<std::size_t>(f);
    i1[a] = std::min(i0[a] + 1, s[a] - 1);
    t[a] = p - f;
  }
  auto at = [&](std::size_t xi, std::size_t yi, std::size_t zi) { return v.at(xi, yi, zi); };
  const double c00 = at(i0[0], i0[1], i0[2]) * (1 - t[0]) + at(i1[0], i0[1], i0[2]) * t[0];
  const double c10 = at(i0[0], i1[1], i0[2]) * (1 - t[0]) + at(i1[0], i1[1], i0[2]) * t[0];
  const double c01 = at(i0[0], i0[1], i1[2]) * (1 - t[0]) + at(i1[0], i0[1], i1[2]) * t[0];
  const double c11 = at(i0[0], i1[1], i1[2]) * (1 - t[0]) + at(i1[0], i1[1], i1[2]) * t[0];
  const double c0 = c00 * (1 - t[1]) + c10 * t[1];
  const double c1 = c01 * (1 - t[1]) + c11 * t[1];
  return c0 * (1 - t[2]) + c1 * t[2];
}

// Same, but zero for positions outside the sampled extent.
double sample_or_zero(const ScalarVolume& v, double x, double y, double z) {
  constexpr double eps = 1e-9;
  const double pos[3] = {x, y, z};
  for (int a = 0; a < 3; ++a) {
    if (pos[a] < -eps || pos[a] > static_cast<double>(v.shape()[a] - 1) + eps) return 0.0;
  }
  return sample_clamped(v, x, y, z);
}

std::array<double, 3> center_of(const Shape& s) {
  return {(static_cast<double>(s.nx) - 1) / 2, (static_cast<double>(s.ny) - 1) / 2,
          (static_cast<double>(s.nz) - 1) / 2};
}

}  // namespace

std::string_view to_string(Kind kind) noexcept {
  switch (kind) {
    case Kind::downsample: return "downsample";
    case Kind::bias: return "bias";
    case Kind::motion: return "motion";
    case Kind::spikes: return "spikes";
    case Kind::noise: return "noise";
    case Kind::ghost: return "ghost";
    case Kind::truncation: return "truncation";
    case Kind::scale: return "scale";
  }
  return "unknown";
}

Kind parse_kind(std::string_view name) {
  for (Kind k : kAllKinds) {
    if (to_string(k) == name) return k;
  }
  throw Error(Errc::parameter, "unknown artifact kind '" + std::string(name) + "'");
}

std::string_view to_string(Axis axis) noexcept {
  switch (axis) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    case Axis::z: return "z";
  }
  return "?";
}

Axis parse_axis(std::string_view name) {
  if (name == "x") return Axis::x;
  if (name == "y") return Axis::y;
  if (name == "z") return Axis::z;
  throw Error(Errc::parameter, "axis must be x, y or z, got '" + std::string(name) + "'");
}

Spec default_spec(Kind kind, std::uint64_t seed) {
  switch (kind) {
    case Kind::downsample: return {DownsampleParams{}, seed};
    case Kind::bias: return {BiasParams{}, seed};
    case Kind::motion: return {MotionParams{}, seed};
    case Kind::spikes: return {SpikesParams{}, seed};
    case Kind::noise: return {NoiseParams{}, seed};
    case Kind::ghost: return {GhostParams{}, seed};
    case Kind::truncation: return {TruncationParams{}, seed};
    case Kind::scale: return {ScaleParams{}, seed};
  }
  throw Error(Errc::parameter, "unknown artifact kind");
}

void check(const Spec& spec) {
  std::visit(
      [](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, DownsampleParams>) {
          require(std::isfinite(p.factor) && p.factor >= 1.0, "downsample factor must be >= 1");
        } else if constexpr (std::is_same_v<P, BiasParams>) {
          require(p.order >= 0 && p.order <= 12, "bias order must be in [0, 12]");
          require(finite_nonneg(p.coeff_magnitude), "bias coeff_magnitude must be >= 0");
        } else if constexpr (std::is_same_v<P, MotionParams>) {
          require(p.num_transforms >= 1, "motion num_transforms must be >= 1");
          require(finite_nonneg(p.max_rotation_deg), "motion max_rotation_deg must be >= 0");
          require(finite_nonneg(p.max_translation_mm), "motion max_translation_mm must be >= 0");
        } else if constexpr (std::is_same_v<P, SpikesParams>) {
          require(p.num_spikes >= 1, "spikes num_spikes must be >= 1");
          require(finite_nonneg(p.intensity), "spikes intensity must be >= 0");
        } else if constexpr (std::is_same_v<P, NoiseParams>) {
          require(finite_nonneg(p.std), "noise std must be >= 0");
        } else if constexpr (std::is_same_v<P, GhostParams>) {
          require(p.num_ghosts >= 1, "ghost num_ghosts must be >= 1");
          require(p.intensity >= 0.0 && p.intensity <= 1.0, "ghost intensity must be in [0, 1]");
        } else if constexpr (std::is_same_v<P, TruncationParams>) {
          require(p.max_fraction > 0.0 && p.max_fraction < 0.5, "truncation max_fraction must be in (0, 0.5)");
        } else if constexpr (std::is_same_v<P, ScaleParams>) {
          require(std::isfinite(p.factor) && p.factor > 0.0, "scale factor must be > 0");
        }
      },
      spec.params);
}

ScalarVolume apply(const ScalarVolume& v, const Spec& spec) {
  check(spec);
  const auto seed = spec.seed;
  return std::visit(
      [&](const auto& p) -> ScalarVolume {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, DownsampleParams>) return downsample(v, p.factor, p.axis, seed);
        else if constexpr (std::is_same_v<P, BiasParams>) return bias(v, p.order, p.coeff_magnitude, seed);
        else if constexpr (std::is_same_v<P, MotionParams>)
          return motion(v, p.num_transforms, p.max_rotation_deg, p.max_translation_mm, seed);
        else if constexpr (std::is_same_v<P, SpikesParams>) return spikes(v, p.num_spikes, p.intensity, seed);
        else if constexpr (std::is_same_v<P, NoiseParams>) return noise(v, p.std, seed);
        else if constexpr (std::is_same_v<P, GhostParams>) return ghost(v, p.num_ghosts, p.axis, p.intensity, seed);
        else if constexpr (std::is_same_v<P, TruncationParams>) return truncation(v, p.max_fraction, seed);
        else return scale(v, p.factor, seed);
      },
      spec.params);
}

// --- downsample -------------------------------------------------------------

ScalarVolume downsample(const ScalarVolume& v, double factor, Axis axis, std::uint64_t) {
  check({DownsampleParams{factor, axis}, 0});
  if (factor == 1.0) return v;

  const int a = static_cast<int>(axis);
  const auto& s = v.shape();
  const std::size_t n = s[a];
  const std::size_t stride = a == 0 ? 1 : a == 1 ? s.nx : s.nx * s.ny;
  // Coarse nodes sit at j * factor and cover [0, n-1]; their hat functions form
  // a partition of unity on the fine grid. Down-sampling is the normalized
  // adjoint of linear interpolation, which keeps constants and total mass.
  const std::size_t nodes = n == 1 ? 1 : static_cast<std::size_t>(std::ceil(static_cast<double>(n - 1) / factor)) + 1;

  std::vector<std::size_t> lo(n);
  std::vector<double> frac(n);
  std::vector<double> weight_sum(nodes, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double q = static_cast<double>(i) / factor;
    lo[i] = std::min(static_cast<std::size_t>(std::floor(q)), nodes - 1);
    frac[i] = lo[i] + 1 < nodes ? q - static_cast<double>(lo[i]) : 0.0;
    weight_sum[lo[i]] += 1.0 - frac[i];
    if (frac[i] > 0.0) weight_sum[lo[i] + 1] += frac[i];
  }

  std::vector<double> out(v.size());
  std::vector<double> coarse(nodes);
  const std::size_t lines = v.size() / n;
  for (std::size_t line = 0; line < lines; ++line) {
    // Base offset of this line: decompose the line counter into the two other axes.
    std::size_t base;
    if (a == 0) {
      base = line * s.nx;
    } else if (a == 1) {
      base = (line % s.nx) + (line / s.nx) * s.nx * s.ny;
    } else {
      base = line;
    }
    std::fill(coarse.begin(), coarse.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = v[base + i * stride];
      coarse[lo[i]] += (1.0 - frac[i]) * x;
      if (frac[i] > 0.0) coarse[lo[i] + 1] += frac[i] * x;
    }
    for (std::size_t j = 0; j < nodes; ++j) coarse[j] /= weight_sum[j];
    for (std::size_t i = 0; i < n; ++i) {
      double y = (1.0 - frac[i]) * coarse[lo[i]];
      if (frac[i] > 0.0) y += frac[i] * coarse[lo[i] + 1];
      out[base + i * stride] = y;
    }
  }
  return checked(v.with_data(std::move(out)), Kind::downsample);
}

// --- bias ---------------------------------------------------------------------

std::size_t bias_term_count(int order) {
  const auto n = static_cast<std::size_t>(order);
  return (n + 1) * (n + 2) * (n + 3) / 6;
}

std::vector<double> bias_coefficients(int order, double coeff_magnitude, std::uint64_t seed) {
  check({BiasParams{order, coeff_magnitude}, seed});
  Rng rng = stream(seed, Kind::bias);
  std::vector<double> c(bias_term_count(order));
  for (auto& x : c) x = rng.uniform(-coeff_magnitude, coeff_magnitude);
  return c;
}

ScalarVolume apply_bias_field(const ScalarVolume& v, int order, std::span<const double> coefficients) {
  require(order >= 0, "bias order must be >= 0");
  require(coefficients.size() == bias_term_count(order), "bias coefficient count does not match order");
  const auto& s = v.shape();
  // powers[a][i * (order+1) + p] = normalized coordinate i on axis a raised to p
  std::array<std::vector<double>, 3> powers;
  for (int a = 0; a < 3; ++a) {
    const std::size_t n = s[a];
    powers[a].resize(n * (order + 1));
    for (std::size_t i = 0; i < n; ++i) {
      const double t = n > 1 ? -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
      double p = 1.0;
      for (int k = 0; k <= order; ++k) {
        powers[a][i * (order + 1) + k] = p;
        p *= t;
      }
    }
  }
  std::vector<double> out(v.size());
  const auto stride = static_cast<std::size_t>(order + 1);
  for (std::size_t z = 0; z < s.nz; ++z) {
    for (std::size_t y = 0; y < s.ny; ++y) {
      for (std::size_t x = 0; x < s.nx; ++x) {
        double field = 0.0;
        std::size_t term = 0;
        for (int i = 0; i <= order; ++i) {
          for (int j = 0; j <= order - i; ++j) {
            for (int k = 0; k <= order - i - j; ++k, ++term) {
              field += coefficients[term] * powers[0][x * stride + i] * powers[1][y * stride + j] *
                       powers[2][z * stride + k];
            }
          }
        }
        const std::size_t idx = v.grid().index(x, y, z);
        out[idx] = v[idx] * std::exp(field);
      }
    }
  }
  return checked(v.with_data(std::move(out)), Kind::bias);
}

ScalarVolume bias(const ScalarVolume& v, int order, double coeff_magnitude, std::uint64_t seed) {
  const auto coeffs = bias_coefficients(order, coeff_magnitude, seed);
  if (coeff_magnitude == 0.0) return v;
  return apply_bias_field(v, order, coeffs);
}

// --- motion -------------------------------------------------------------------

std::vector<RigidMotion> sample_motions(int num_transforms, double max_rotation_deg, double max_translation_mm,
                                        std::uint64_t seed) {
  check({MotionParams{num_transforms, max_rotation_deg, max_translation_mm}, seed});
  Rng rng = stream(seed, Kind::motion);
  std::vector<RigidMotion> out(static_cast<std::size_t>(num_transforms));
  for (auto& m : out) {
    for (auto& r : m.rotation_deg) r = rng.uniform(-max_rotation_deg, max_rotation_deg);
    for (auto& t : m.translation_mm) t = rng.uniform(-max_translation_mm, max_translation_mm);
  }
  return out;
}

ScalarVolume move_rigid(const ScalarVolume& v, const RigidMotion& m) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double ax = m.rotation_deg[0] * deg, ay = m.rotation_deg[1] * deg, az = m.rotation_deg[2] * deg;
  const double cx = std::cos(ax), sx = std::sin(ax), cy = std::cos(ay), sy = std::sin(ay), cz = std::cos(az),
               sz = std::sin(az);
  // R = Rz * Ry * Rx
  const double r[3][3] = {{cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx},
                          {sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx},
                          {-sy, cy * sx, cy * cx}};
  const auto& s = v.shape();
  const auto& sp = v.spacing();
  const double spacing[3] = {sp.sx, sp.sy, sp.sz};
  const auto c = center_of(s);

  std::vector<double> out(v.size());
  for (std::size_t z = 0; z < s.nz; ++z) {
    for (std::size_t y = 0; y < s.ny; ++y) {
      for (std::size_t x = 0; x < s.nx; ++x) {
        const double p[3] = {static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
        double d[3];
        for (int a = 0; a < 3; ++a) d[a] = (p[a] - c[a]) * spacing[a] - m.translation_mm[a];
        double q[3];
        // Source position: inverse rotation (R^T) of the displaced offset.
        for (int a = 0; a < 3; ++a) {
          q[a] = c[a] + (r[0][a] * d[0] + r[1][a] * d[1] + r[2][a] * d[2]) / spacing[a];
        }
        out[v.grid().index(x, y, z)] = sample_clamped(v, q[0], q[1], q[2]);
      }
    }
  }
  return v.with_data(std::move(out));
}

std::pair<std::size_t, std::size_t> motion_band(std::size_t b, std::size_t bands, std::size_t nz) {
  return {b * nz / bands, (b + 1) * nz / bands};
}

ScalarVolume motion_from_transforms(const ScalarVolume& v, std::span<const RigidMotion> transforms) {
  require(!transforms.empty(), "motion needs at least one transform");
  const auto& s = v.shape();
  const std::size_t bands = transforms.size() + 1;
  fft::Spectrum stitched = fft::forward(v);
  const std::size_t plane = s.nx * s.ny;
  for (std::size_t b = 1; b < bands; ++b) {
    const auto [first, last] = motion_band(b, bands, s.nz);
    if (first == last) continue;
    const fft::Spectrum moved = fft::forward(move_rigid(v, transforms[b - 1]));
    for (std::size_t sidx = first; sidx < last; ++sidx) {
      const std::size_t kz = fft::centered_to_bin(sidx, s.nz);
      std::copy_n(moved.bins.begin() + kz * plane, plane, stitched.bins.begin() + kz * plane);
    }
  }
  return checked(v.with_data(fft::inverse_real(std::move(stitched))), Kind::motion);
}

ScalarVolume motion(const ScalarVolume& v, int num_transforms, double max_rotation_deg, double max_translation_mm,
                    std::uint64_t seed) {
  const auto transforms = sample_motions(num_transforms, max_rotation_deg, max_translation_mm, seed);
  return motion_from_transforms(v, transforms);
}

// --- spikes -------------------------------------------------------------------

ScalarVolume add_kspace_spikes(const ScalarVolume& v, std::span<const KSpaceSpike> spikes) {
  fft::Spectrum k = fft::forward(v);
  const auto& s = v.shape();
  for (const auto& sp : spikes) {
    require(sp.bin[0] < s.nx && sp.bin[1] < s.ny && sp.bin[2] < s.nz, "spike bin outside k-space");
    k.at(sp.bin[0], sp.bin[1], sp.bin[2]) += sp.value;
  }
  return checked(v.with_data(fft::inverse_real(std::move(k))), Kind::spikes);
}

ScalarVolume spikes(const ScalarVolume& v, int num_spikes, double intensity, std::uint64_t seed) {
  check({SpikesParams{num_spikes, intensity}, seed});
  const std::size_t n = v.size();
  fft::Spectrum k = fft::forward(v);
  double kmax = 0.0;
  for (const auto& c : k.bins) kmax = std::max(kmax, std::abs(c));

  Rng rng = stream(seed, Kind::spikes);
  for (int i = 0; i < num_spikes; ++i) {
    // Non-DC bin, uniform over the remaining n - 1 bins; phase uniform.
    const std::size_t flat = n > 1 ? 1 + rng.below(n - 1) : 0;
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    if (n == 1) continue;
    k.bins[flat] += std::polar(intensity * kmax, phase);
  }
  return checked(v.with_data(fft::inverse_real(std::move(k))), Kind::spikes);
}

// --- noise --------------------------------------------------------------------

ScalarVolume noise(const ScalarVolume& v, double std, std::uint64_t seed) {
  check({NoiseParams{std}, seed});
  if (std == 0.0) return v;
  Rng rng = stream(seed, Kind::noise);
  std::vector<double> out(v.data().begin(), v.data().end());
  for (auto& x : out) x += std * rng.normal();
  return checked(v.with_data(std::move(out)), Kind::noise);
}

// --- ghost --------------------------------------------------------------------

ScalarVolume ghost(const ScalarVolume& v, int num_ghosts, Axis axis, double intensity, std::uint64_t seed) {
  check({GhostParams{num_ghosts, axis, intensity}, seed});
  const auto& s = v.shape();
  fft::Spectrum k = fft::forward(v);
  const double gain = 1.0 - intensity;
  const int a = static_cast<int>(axis);
  const std::size_t n = s[a];
  for (std::size_t kz = 0; kz < s.nz; ++kz) {
    for (std::size_t ky = 0; ky < s.ny; ++ky) {
      for (std::size_t kx = 0; kx < s.nx; ++kx) {
        const std::size_t bin = a == 0 ? kx : a == 1 ? ky : kz;
        const long f = fft::signed_frequency(bin, n);
        if (f != 0 && f % num_ghosts == 0) k.at(kx, ky, kz) *= gain;
      }
    }
  }
  return checked(v.with_data(fft::inverse_real(std::move(k))), Kind::ghost);
}

// --- truncation ---------------------------------------------------------------

ScalarVolume truncation(const ScalarVolume& v, double max_fraction, std::uint64_t seed) {
  check({TruncationParams{max_fraction}, seed});
  const auto& s = v.shape();
  const auto limit = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::floor(max_fraction * static_cast<double>(s.nz))));
  Rng rng = stream(seed, Kind::truncation);
  const auto n_top = static_cast<std::size_t>(rng.integer(1, limit));
  const auto n_bottom = static_cast<std::size_t>(rng.integer(1, limit));
  std::vector<double> out(v.data().begin(), v.data().end());
  const std::size_t plane = s.nx * s.ny;
  for (std::size_t z = 0; z < s.nz; ++z) {
    if (z < n_bottom || z + n_top >= s.nz) {
      std::fill_n(out.begin() + z * plane, plane, 0.0);
    }
  }
  return v.with_data(std::move(out));
}

// --- scale --------------------------------------------------------------------

ScalarVolume scale(const ScalarVolume& v, double factor, std::uint64_t seed) {
  check({ScaleParams{factor}, seed});
  if (factor == 1.0) return v;
  const auto& s = v.shape();
  const auto c = center_of(s);
  std::vector<double> out(v.size());
  for (std::size_t z = 0; z < s.nz; ++z) {
    for (std::size_t y = 0; y < s.ny; ++y) {
      for (std::size_t x = 0; x < s.nx; ++x) {
        const double qx = c[0] + (static_cast<double>(x) - c[0]) / factor;
        const double qy = c[1] + (static_cast<double>(y) - c[1]) / factor;
        const double qz = c[2] + (static_cast<double>(z) - c[2]) / factor;
        out[v.grid().index(x, y, z)] = sample_or_zero(v, qx, qy, qz);
      }
    }
  }
  return checked(v.with_data(std::move(out)), Kind::scale);
}

}  // namespace oodbench::artifacts
