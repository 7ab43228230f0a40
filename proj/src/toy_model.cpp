#include "oodbench/toy_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

#include "oodbench/error.hpp"
#include "oodbench/random.hpp"

namespace oodbench::toy {

namespace {

constexpr std::uint64_t kPhantomStream = 0x9a47'0000'0000'0001ULL;
constexpr std::uint64_t kJitterStream = 0x9a47'0000'0000'0002ULL;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::parameter, what);
}

std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

// 1D convolution along one axis with edge clamping; kernel centered.
std::vector<double> convolve_axis(std::span<const double> in, const Shape& s, int axis,
                                  std::span<const double> kernel) {
  const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  const std::size_t n = s[axis];
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? s.nx : s.nx * s.ny;
  std::vector<double> out(in.size());
  std::vector<double> line(n);
  const std::size_t lines = in.size() / n;
  for (std::size_t l = 0; l < lines; ++l) {
    std::size_t base;
    if (axis == 0) base = l * s.nx;
    else if (axis == 1) base = (l % s.nx) + (l / s.nx) * s.nx * s.ny;
    else base = l;
    for (std::size_t i = 0; i < n; ++i) line[i] = in[base + i * stride];
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * line[clamp_index(static_cast<std::ptrdiff_t>(i) + k, n)];
      }
      out[base + i * stride] = acc;
    }
  }
  return out;
}

}  // namespace

// --- phantom --------------------------------------------------------------------

void check(const PhantomSpec& spec) {
  require(spec.shape.voxels() > 0, "phantom shape must be positive");
  for (int i = 0; i < 4; ++i) {
    require(std::isfinite(spec.means[i]), "phantom means must be finite");
    require(std::isfinite(spec.stds[i]) && spec.stds[i] >= 0.0, "phantom stds must be >= 0");
    for (int j = 0; j < i; ++j) require(spec.means[i] != spec.means[j], "phantom class means must be distinct");
  }
  require(spec.lesion_count_min >= 0 && spec.lesion_count_max >= spec.lesion_count_min,
          "lesion count range must satisfy 0 <= min <= max");
  require(spec.lesion_radius_min >= 1.0 && spec.lesion_radius_max >= spec.lesion_radius_min,
          "lesion radius range must satisfy 1 <= min <= max");
  require(spec.head_fraction > 0.0 && spec.head_fraction <= 0.5, "head_fraction must be in (0, 0.5]");
  require(spec.shape_jitter >= 0.0 && spec.shape_jitter < spec.head_fraction, "shape_jitter out of range");
  require(spec.intensity_jitter >= 0.0 && spec.intensity_jitter < 1.0, "intensity_jitter must be in [0, 1)");
  const double smallest = static_cast<double>(std::min({spec.shape.nx, spec.shape.ny, spec.shape.nz}));
  const double min_semi = (spec.head_fraction - spec.shape_jitter) * smallest;
  // Inner tissue has to keep at least one voxel radius after fitting the lesion.
  require(spec.lesion_count_max == 0 || spec.lesion_radius_max + 1.0 <= min_semi,
          "lesion radius exceeds head size");
}

Phantom make_phantom(const PhantomSpec& spec) {
  check(spec);
  Rng rng(spec.seed, kPhantomStream);
  const Shape& s = spec.shape;
  const Grid grid = make_grid(s, spec.spacing);

  const double gain = 1.0 + rng.uniform(-spec.intensity_jitter, spec.intensity_jitter);
  std::array<double, 3> semi{}, center{};
  for (int a = 0; a < 3; ++a) {
    semi[a] = (spec.head_fraction + rng.uniform(-spec.shape_jitter, spec.shape_jitter)) * static_cast<double>(s[a]);
  }
  for (int a = 0; a < 3; ++a) center[a] = (static_cast<double>(s[a]) - 1.0) / 2.0 + rng.uniform(-1.0, 1.0);
  constexpr double kInnerScale = 0.6;

  std::vector<std::uint16_t> labels(grid.voxels(), kPhantomBackground);
  auto ellipsoid = [&](std::size_t x, std::size_t y, std::size_t z, double shrink, double margin) {
    const double p[3] = {static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
    double e = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double r = semi[a] * shrink - margin;
      const double d = (p[a] - center[a]) / r;
      e += d * d;
    }
    return e;
  };
  for (std::size_t z = 0; z < s.nz; ++z) {
    for (std::size_t y = 0; y < s.ny; ++y) {
      for (std::size_t x = 0; x < s.nx; ++x) {
        auto& l = labels[grid.index(x, y, z)];
        if (ellipsoid(x, y, z, kInnerScale, 0.0) <= 1.0) l = kPhantomInnerTissue;
        else if (ellipsoid(x, y, z, 1.0, 0.0) <= 1.0) l = kPhantomOuterTissue;
      }
    }
  }

  std::vector<Lesion> lesions;
  const auto count = rng.integer(spec.lesion_count_min, spec.lesion_count_max);
  for (std::int64_t i = 0; i < count; ++i) {
    Lesion lesion;
    lesion.radius = rng.uniform(spec.lesion_radius_min, spec.lesion_radius_max);
    bool placed = false;
    for (int attempt = 0; attempt < 100000 && !placed; ++attempt) {
      const auto x = static_cast<std::size_t>(rng.below(s.nx));
      const auto y = static_cast<std::size_t>(rng.below(s.ny));
      const auto z = static_cast<std::size_t>(rng.below(s.nz));
      if (ellipsoid(x, y, z, 1.0, lesion.radius) <= 1.0) {
        lesion.center = {static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
        placed = true;
      }
    }
    if (!placed) throw Error(Errc::parameter, "could not place a lesion inside the head");
    lesions.push_back(lesion);
  }
  for (const auto& lesion : lesions) {
    const double r2 = lesion.radius * lesion.radius;
    const auto reach = static_cast<std::ptrdiff_t>(std::ceil(lesion.radius));
    const auto cx = static_cast<std::ptrdiff_t>(lesion.center[0]);
    const auto cy = static_cast<std::ptrdiff_t>(lesion.center[1]);
    const auto cz = static_cast<std::ptrdiff_t>(lesion.center[2]);
    for (auto dz = -reach; dz <= reach; ++dz) {
      for (auto dy = -reach; dy <= reach; ++dy) {
        for (auto dx = -reach; dx <= reach; ++dx) {
          if (static_cast<double>(dx * dx + dy * dy + dz * dz) > r2) continue;
          const auto x = cx + dx, y = cy + dy, z = cz + dz;
          if (x < 0 || y < 0 || z < 0 || x >= static_cast<std::ptrdiff_t>(s.nx) ||
              y >= static_cast<std::ptrdiff_t>(s.ny) || z >= static_cast<std::ptrdiff_t>(s.nz)) {
            continue;
          }
          labels[grid.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z))] =
              kPhantomLesion;
        }
      }
    }
  }

  std::vector<double> image(grid.voxels());
  for (std::size_t v = 0; v < image.size(); ++v) {
    const auto l = labels[v];
    const double texture = rng.normal();
    image[v] = gain * (spec.means[l] + spec.stds[l] * texture);
  }
  return {ScalarVolume(grid, std::move(image)), LabelVolume(grid, std::move(labels), kPhantomClasses),
          std::move(lesions)};
}

// --- segmenter -----------------------------------------------------------------

ToyModelConfig ToyModelConfig::binary() {
  ToyModelConfig cfg;
  cfg.prototypes = {100.0, 200.0};
  cfg.lesion_class = 1;
  return cfg;
}

ToyModelConfig ToyModelConfig::multiclass() {
  ToyModelConfig cfg;
  cfg.prototypes = {0.0, 40.0, 80.0, 100.0, 120.0, 140.0, 160.0, 200.0};
  cfg.lesion_class = 7;
  return cfg;
}

void check(const ToyModelConfig& cfg) {
  require(cfg.prototypes.size() >= 2, "toy model needs at least 2 class prototypes");
  for (double p : cfg.prototypes) require(std::isfinite(p), "prototypes must be finite");
  require(cfg.lesion_class >= 0 && cfg.lesion_class < cfg.num_classes(), "lesion_class outside the class range");
  require(std::isfinite(cfg.temperature) && cfg.temperature > 0.0, "temperature must be > 0");
  require(std::isfinite(cfg.smoothing) && cfg.smoothing >= 0.0, "smoothing must be >= 0");
  require(std::isfinite(cfg.perturbation) && cfg.perturbation >= 0.0, "perturbation must be >= 0");
  require(std::isfinite(cfg.feature_sigma) && cfg.feature_sigma > 0.0, "feature_sigma must be > 0");
}

std::vector<double> jittered_prototypes(const ToyModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed, kJitterStream);
  std::vector<double> out(cfg.prototypes);
  for (auto& p : out) {
    const double z = rng.normal();
    if (cfg.perturbation > 0.0) p += cfg.perturbation * z;
  }
  return out;
}

void classify_into(const ScalarVolume& smoothed, std::span<const double> prototypes, double temperature,
                   std::span<double> probs) {
  // exp of a logit this far below the winner is under half an ulp of the sum.
  constexpr double kNegligible = -40.0;
  const std::size_t n = smoothed.size();
  const std::size_t classes = prototypes.size();
  if (probs.size() != n * classes) throw Error(Errc::shape, "classify buffer must hold C x N values");
  std::vector<double> p(classes);
  const double inv_t = 1.0 / temperature;
  // Runs of equal intensity (background) share one evaluation.
  for (std::size_t v = 0, end = 0; v < n; v = end) {
    const double intensity = smoothed[v];
    for (end = v + 1; end < n && smoothed[end] == intensity; ++end) {
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) {
      const double d = intensity - prototypes[c];
      p[c] = -d * d * inv_t;
      if (p[c] > best) best = p[c];
    }
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double s = p[c] - best;
      p[c] = s == 0.0 ? 1.0 : s < kNegligible ? 0.0 : std::exp(s);
      z += p[c];
    }
    const double inv_z = 1.0 / z;
    for (std::size_t c = 0; c < classes; ++c) {
      double* out = probs.data() + c * n;
      const double value = p[c] * inv_z;
      if (end - v == 1) {
        out[v] = value;
      } else {
        std::fill(out + v, out + end, value);
      }
    }
  }
}

ProbVolume classify(const ScalarVolume& smoothed, std::span<const double> prototypes, double temperature) {
  std::vector<double> probs(smoothed.size() * prototypes.size());
  classify_into(smoothed, prototypes, temperature, probs);
  return ProbVolume(smoothed.grid(), static_cast<int>(prototypes.size()), std::move(probs));
}

ProbVolume segment(const ScalarVolume& v, const ToyModelConfig& cfg, std::optional<std::uint64_t> perturb_seed) {
  check(cfg);
  const ScalarVolume smoothed = gaussian_blur(v, cfg.smoothing);
  if (perturb_seed) return classify(smoothed, jittered_prototypes(cfg, *perturb_seed), cfg.temperature);
  return classify(smoothed, cfg.prototypes, cfg.temperature);
}

// --- filters ---------------------------------------------------------------------

std::vector<double> gaussian_kernel(double sigma) {
  require(std::isfinite(sigma) && sigma >= 0.0, "gaussian sigma must be >= 0");
  if (sigma == 0.0) return {1.0};
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (auto& w : k) w /= sum;
  return k;
}

ScalarVolume gaussian_blur(const ScalarVolume& v, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  if (kernel.size() == 1) return v;
  std::vector<double> data(v.data().begin(), v.data().end());
  for (int axis = 0; axis < 3; ++axis) data = convolve_axis(data, v.shape(), axis, kernel);
  return v.with_data(std::move(data));
}

ScalarVolume gradient_magnitude(const ScalarVolume& v, std::size_t step) {
  const auto& s = v.shape();
  const auto h = static_cast<std::ptrdiff_t>(step);
  std::vector<double> out(v.size());
  for (std::size_t z = 0; z < s.nz; ++z) {
    for (std::size_t y = 0; y < s.ny; ++y) {
      for (std::size_t x = 0; x < s.nx; ++x) {
        const auto xi = static_cast<std::ptrdiff_t>(x), yi = static_cast<std::ptrdiff_t>(y),
                   zi = static_cast<std::ptrdiff_t>(z);
        const double gx = v.at(clamp_index(xi + h, s.nx), y, z) - v.at(clamp_index(xi - h, s.nx), y, z);
        const double gy = v.at(x, clamp_index(yi + h, s.ny), z) - v.at(x, clamp_index(yi - h, s.ny), z);
        const double gz = v.at(x, y, clamp_index(zi + h, s.nz)) - v.at(x, y, clamp_index(zi - h, s.nz));
        out[v.grid().index(x, y, z)] = std::sqrt(gx * gx + gy * gy + gz * gz) / (2.0 * static_cast<double>(step));
      }
    }
  }
  return v.with_data(std::move(out));
}

ScalarVolume laplacian(const ScalarVolume& v, std::size_t step) {
  const auto& s = v.shape();
  const auto h = static_cast<std::ptrdiff_t>(step);
  const double inv_h2 = 1.0 / static_cast<double>(step * step);
  std::vector<double> out(v.size());
  for (std::size_t z = 0; z < s.nz; ++z) {
    for (std::size_t y = 0; y < s.ny; ++y) {
      for (std::size_t x = 0; x < s.nx; ++x) {
        const auto xi = static_cast<std::ptrdiff_t>(x), yi = static_cast<std::ptrdiff_t>(y),
                   zi = static_cast<std::ptrdiff_t>(z);
        const double c = v.at(x, y, z);
        const double lx = v.at(clamp_index(xi + h, s.nx), y, z) + v.at(clamp_index(xi - h, s.nx), y, z) - 2 * c;
        const double ly = v.at(x, clamp_index(yi + h, s.ny), z) + v.at(x, clamp_index(yi - h, s.ny), z) - 2 * c;
        const double lz = v.at(x, y, clamp_index(zi + h, s.nz)) + v.at(x, y, clamp_index(zi - h, s.nz)) - 2 * c;
        out[v.grid().index(x, y, z)] = (lx + ly + lz) * inv_h2;
      }
    }
  }
  return v.with_data(std::move(out));
}

ScalarVolume block_mean(const ScalarVolume& v, std::size_t block) {
  require(block >= 1, "block size must be >= 1");
  if (block == 1) return v;
  const auto& s = v.shape();
  std::vector<double> out(v.size());
  for (std::size_t z = 0; z < s.nz; ++z) {
    for (std::size_t y = 0; y < s.ny; ++y) {
      for (std::size_t x = 0; x < s.nx; ++x) {
        const std::size_t x0 = x / block * block, y0 = y / block * block, z0 = z / block * block;
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t zz = z0; zz < std::min(z0 + block, s.nz); ++zz)
          for (std::size_t yy = y0; yy < std::min(y0 + block, s.ny); ++yy)
            for (std::size_t xx = x0; xx < std::min(x0 + block, s.nx); ++xx) {
              sum += v.at(xx, yy, zz);
              ++count;
            }
        out[v.grid().index(x, y, z)] = sum / static_cast<double>(count);
      }
    }
  }
  return v.with_data(std::move(out));
}

std::vector<ScalarVolume> features(const ScalarVolume& v, const ToyModelConfig& cfg) {
  check(cfg);
  std::vector<ScalarVolume> out;
  out.reserve(kFeatureChannels);
  for (std::size_t scale : {std::size_t{1}, std::size_t{2}}) {
    ScalarVolume base = block_mean(v, scale);
    ScalarVolume blurred = gaussian_blur(base, cfg.feature_sigma * static_cast<double>(scale));
    ScalarVolume grad = gradient_magnitude(base, scale);
    std::vector<double> lap(base.size());
    const ScalarVolume raw = laplacian(base, scale);
    for (std::size_t i = 0; i < lap.size(); ++i) lap[i] = std::abs(raw[i]);
    ScalarVolume rectified = base.with_data(std::move(lap));
    out.push_back(std::move(base));
    out.push_back(std::move(blurred));
    out.push_back(std::move(grad));
    out.push_back(std::move(rectified));
  }
  return out;
}

}  // namespace oodbench::toy
