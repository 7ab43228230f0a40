#include <doctest.h>

#include <numeric>

#include "oodbench/artifacts.hpp"
#include "oodbench/toy_model.hpp"
#include "oodbench/uq_scores.hpp"
#include "support.hpp"

using namespace oodbench;
using namespace oodbench::toy;
using testing::error_code;

namespace {

PhantomSpec spec_with_seed(std::uint64_t seed) {
  PhantomSpec s;
  s.seed = seed;
  return s;
}

double average(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

TEST_CASE("phantoms are seeded and deterministic") {
  const auto a = make_phantom(spec_with_seed(3));
  const auto b = make_phantom(spec_with_seed(3));
  const auto c = make_phantom(spec_with_seed(4));
  CHECK(a.image == b.image);
  CHECK(a.labels == b.labels);
  CHECK_FALSE(a.image == c.image);
  CHECK(a.labels.num_classes() == kPhantomClasses);
  CHECK(a.image.all_finite());
  CHECK(a.lesions.size() >= 1);
  CHECK(a.lesions.size() <= 4);
  for (std::size_t v = 0; v < a.image.size(); ++v) {
    if (a.labels[v] == kPhantomBackground) CHECK(a.image[v] == 0.0);
  }
  CHECK(a.labels.count(kPhantomOuterTissue) > 0);
  CHECK(a.labels.count(kPhantomInnerTissue) > 0);
}

TEST_CASE("zero lesions leave no lesion voxels") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto s = spec_with_seed(seed);
    s.lesion_count_min = s.lesion_count_max = 0;
    const auto p = make_phantom(s);
    CHECK(p.lesions.empty());
    CHECK(p.labels.count(kPhantomLesion) == 0);
  }
}

TEST_CASE("a single radius-3 lesion covers the discrete ball") {
  std::size_t ball = 0;
  for (int dz = -3; dz <= 3; ++dz)
    for (int dy = -3; dy <= 3; ++dy)
      for (int dx = -3; dx <= 3; ++dx) ball += dx * dx + dy * dy + dz * dz <= 9;
  CHECK(ball == 123);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = spec_with_seed(seed);
    s.lesion_count_min = s.lesion_count_max = 1;
    s.lesion_radius_min = s.lesion_radius_max = 3.0;
    const auto p = make_phantom(s);
    REQUIRE(p.lesions.size() == 1);
    CHECK(p.labels.count(kPhantomLesion) == ball);
    const auto& c = p.lesions[0].center;
    for (int dz = -3; dz <= 3; ++dz)
      for (int dy = -3; dy <= 3; ++dy)
        for (int dx = -3; dx <= 3; ++dx) {
          if (dx * dx + dy * dy + dz * dz > 9) continue;
          const auto x = static_cast<std::size_t>(c[0] + dx), y = static_cast<std::size_t>(c[1] + dy),
                     z = static_cast<std::size_t>(c[2] + dz);
          CHECK(p.labels[p.labels.grid().index(x, y, z)] == kPhantomLesion);
        }
  }
}

TEST_CASE("invalid phantom specs") {
  auto big = spec_with_seed(0);
  big.lesion_radius_min = big.lesion_radius_max = 12.0;
  CHECK(error_code([&] { make_phantom(big); }) == Errc::parameter);
  auto same = spec_with_seed(0);
  same.means[2] = same.means[1];
  CHECK(error_code([&] { make_phantom(same); }) == Errc::parameter);
  auto r = spec_with_seed(0);
  r.lesion_radius_min = 0.5;
  CHECK(error_code([&] { make_phantom(r); }) == Errc::parameter);
  auto n = spec_with_seed(0);
  n.lesion_count_min = 3;
  n.lesion_count_max = 2;
  CHECK(error_code([&] { make_phantom(n); }) == Errc::parameter);
}

TEST_CASE("model presets and validation") {
  const auto b = ToyModelConfig::binary();
  const auto m = ToyModelConfig::multiclass();
  CHECK(b.num_classes() == 2);
  CHECK(m.num_classes() == 8);
  CHECK(b.lesion_class == 1);
  CHECK(m.lesion_class == 7);
  check(b);
  check(m);
  auto bad = b;
  bad.temperature = 0.0;
  CHECK(error_code([&] { check(bad); }) == Errc::parameter);
  bad = b;
  bad.lesion_class = 2;
  CHECK(error_code([&] { check(bad); }) == Errc::parameter);
  bad = b;
  bad.prototypes = {1.0};
  CHECK(error_code([&] { check(bad); }) == Errc::parameter);
}

TEST_CASE("classification matches the closed-form softmax") {
  const std::vector<double> protos{0.0, 40.0, 100.0, 200.0};
  const auto v = testing::random_volume({6, 5, 4}, 1, -20.0, 230.0);
  const double tau = 150.0;
  const auto p = classify(v, protos, tau);
  CHECK_FALSE(validate(p).has_value());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::vector<double> e(4);
    double z = 0.0;
    for (int c = 0; c < 4; ++c) z += e[c] = std::exp(-(v[i] - protos[c]) * (v[i] - protos[c]) / tau);
    for (int c = 0; c < 4; ++c) CHECK(std::abs(p.at(c, i) - e[c] / z) < 1e-12);
  }
}

TEST_CASE("an intensity at a prototype is classified with high confidence") {
  const auto v = testing::constant_volume({3, 3, 3}, 200.0);
  const std::vector<double> protos{100.0, 200.0};
  const double tau = 200.0;
  const auto p = classify(v, protos, tau);
  // two-class softmax: 1 / (1 + exp(-(100^2) / tau))
  const double closed = 1.0 / (1.0 + std::exp(-100.0 * 100.0 / tau));
  CHECK(p.at(1, 0) > 0.99);
  CHECK(std::abs(p.at(1, 13) - closed) < 1e-15);
}

TEST_CASE("segmentation output is always a valid probability field") {
  for (const auto& cfg : {ToyModelConfig::binary(), ToyModelConfig::multiclass()}) {
    const auto ph = make_phantom(spec_with_seed(5));
    CHECK_FALSE(validate(segment(ph.image, cfg)).has_value());
    CHECK_FALSE(validate(segment(ph.image, cfg, 17)).has_value());
    const auto noisy = artifacts::noise(ph.image, 200.0, 1);
    CHECK_FALSE(validate(segment(noisy, cfg, 3)).has_value());
  }
}

TEST_CASE("zero perturbation gives identical members and zero variance") {
  auto cfg = ToyModelConfig::binary();
  cfg.perturbation = 0.0;
  const auto ph = make_phantom(spec_with_seed(6));
  const auto plain = segment(ph.image, cfg);
  std::vector<ProbVolume> stack;
  for (std::uint64_t t = 0; t < 5; ++t) {
    stack.push_back(segment(ph.image, cfg, t));
    CHECK(std::equal(plain.probs().begin(), plain.probs().end(), stack.back().probs().begin()));
  }
  const auto u = uq::variance_uncertainty(PredictionStack(stack));
  CHECK(uq::image_score(u) == 0.0);
}

TEST_CASE("perturbed members disagree at a voxel between two prototypes") {
  const auto cfg = ToyModelConfig::binary();
  const auto v = testing::constant_volume({2, 2, 2}, 150.0);
  std::vector<ProbVolume> stack;
  for (std::uint64_t t = 0; t < 20; ++t) stack.push_back(segment(v, cfg, t));
  CHECK(uq::variance_uncertainty(PredictionStack(stack)).values[0] > 0.0);
  CHECK(jittered_prototypes(cfg, 4) == jittered_prototypes(cfg, 4));
  CHECK_FALSE(jittered_prototypes(cfg, 4) == jittered_prototypes(cfg, 5));
}

TEST_CASE("gaussian kernel") {
  CHECK(gaussian_kernel(0.0) == std::vector<double>{1.0});
  for (double sigma : {0.5, 0.75, 1.0, 2.0}) {
    const auto k = gaussian_kernel(sigma);
    const auto r = static_cast<int>(std::ceil(3.0 * sigma));
    REQUIRE(k.size() == static_cast<std::size_t>(2 * r + 1));
    double z = 0.0;
    for (int i = -r; i <= r; ++i) z += std::exp(-i * i / (2.0 * sigma * sigma));
    double total = 0.0;
    for (int i = -r; i <= r; ++i) {
      CHECK(std::abs(k[i + r] - std::exp(-i * i / (2.0 * sigma * sigma)) / z) < 1e-15);
      total += k[i + r];
    }
    CHECK(std::abs(total - 1.0) < 1e-14);
  }
  CHECK(error_code([] { gaussian_kernel(-1.0); }) == Errc::parameter);
}

TEST_CASE("feature bank") {
  const auto cfg = ToyModelConfig::binary();
  const auto c = testing::constant_volume({8, 8, 8}, 5.0);
  const auto fc = features(c, cfg);
  REQUIRE(fc.size() == kFeatureChannels);
  for (std::size_t ch : {2u, 3u, 6u, 7u})
    for (double x : fc[ch].data()) CHECK(x == 0.0);

  const auto v = testing::random_volume({9, 8, 7}, 2);
  const auto f = features(v, cfg);
  REQUIRE(f.size() == kFeatureChannels);
  CHECK(f[0] == v);
  for (const auto& ch : f) CHECK(ch.shape() == v.shape());
  CHECK(features(v, cfg)[5] == f[5]);
}

TEST_CASE("blur of an impulse is the separable kernel and keeps the sum") {
  const Shape s{15, 15, 15};
  std::vector<double> d(s.voxels(), 0.0);
  d[7 + 15 * (7 + 15 * 7)] = 1.0;
  const auto v = testing::filled(s, d);
  const auto cfg = ToyModelConfig::binary();
  const auto blurred = features(v, cfg)[1];
  const auto k = gaussian_kernel(cfg.feature_sigma);
  const int r = static_cast<int>(k.size() / 2);
  double total = 0.0;
  for (std::size_t z = 0; z < 15; ++z)
    for (std::size_t y = 0; y < 15; ++y)
      for (std::size_t x = 0; x < 15; ++x) {
        const int dx = static_cast<int>(x) - 7, dy = static_cast<int>(y) - 7, dz = static_cast<int>(z) - 7;
        double expect = 0.0;
        if (std::abs(dx) <= r && std::abs(dy) <= r && std::abs(dz) <= r) expect = k[dx + r] * k[dy + r] * k[dz + r];
        CHECK(std::abs(blurred.at(x, y, z) - expect) < 1e-15);
        total += blurred.at(x, y, z);
      }
  CHECK(std::abs(total - 1.0) < 1e-6);
}

TEST_CASE("finite-difference filters on polynomials") {
  const Shape s{8, 6, 5};
  std::vector<double> ramp(s.voxels()), quad(s.voxels());
  for (std::size_t z = 0; z < 5; ++z)
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t x = 0; x < 8; ++x) {
        ramp[x + 8 * (y + 6 * z)] = 3.0 * x;
        quad[x + 8 * (y + 6 * z)] = static_cast<double>(x * x);
      }
  const auto g = gradient_magnitude(testing::filled(s, ramp));
  const auto g2 = gradient_magnitude(testing::filled(s, ramp), 2);
  const auto l = laplacian(testing::filled(s, quad));
  for (std::size_t x = 2; x < 6; ++x) {
    CHECK(g.at(x, 3, 2) == doctest::Approx(3.0));
    CHECK(g2.at(x, 3, 2) == doctest::Approx(3.0));
    CHECK(l.at(x, 3, 2) == doctest::Approx(2.0));
  }
  // edge clamp: one-sided difference at the border
  CHECK(g.at(0, 3, 2) == doctest::Approx(1.5));
}

TEST_CASE("block means") {
  const Shape s{4, 2, 2};
  std::vector<double> d(16);
  std::iota(d.begin(), d.end(), 0.0);
  const auto b = block_mean(testing::filled(s, d), 2);
  // block x in {0,1}: indices 0,1,4,5,8,9,12,13 -> mean 6.5
  CHECK(b.at(0, 0, 0) == 6.5);
  CHECK(b.at(1, 1, 1) == 6.5);
  CHECK(b.at(2, 0, 0) == 8.5);
  CHECK(block_mean(testing::filled(s, d), 1) == testing::filled(s, d));

  const auto odd = block_mean(testing::filled({3, 1, 1}, {1.0, 3.0, 10.0}), 2);
  CHECK(odd.at(0, 0, 0) == 2.0);
  CHECK(odd.at(2, 0, 0) == 10.0);
}

TEST_CASE("noise raises the DUM score and the MC variance over clean phantoms") {
  const auto cfg = ToyModelConfig::binary();
  std::vector<Signature> refs;
  for (std::uint64_t i = 0; i < 20; ++i) refs.push_back(uq::dum_signature(features(make_phantom(spec_with_seed(100 + i)).image, cfg)));
  const uq::ReferenceSignatureSet bank(refs);

  std::vector<double> clean_dum, noisy_dum, clean_var, noisy_var;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto img = make_phantom(spec_with_seed(200 + i)).image;
    const auto noisy = artifacts::apply(img, artifacts::default_spec(artifacts::Kind::noise, i));
    clean_dum.push_back(uq::dum_score(uq::dum_signature(features(img, cfg)), bank));
    noisy_dum.push_back(uq::dum_score(uq::dum_signature(features(noisy, cfg)), bank));
    if (i < 8) {
      std::vector<ProbVolume> a, b;
      for (std::uint64_t t = 0; t < 20; ++t) {
        a.push_back(segment(img, cfg, 1000 + t));
        b.push_back(segment(noisy, cfg, 1000 + t));
      }
      clean_var.push_back(uq::image_score(uq::variance_uncertainty(PredictionStack(a))));
      noisy_var.push_back(uq::image_score(uq::variance_uncertainty(PredictionStack(b))));
    }
  }
  CHECK(average(noisy_dum) > average(clean_dum));
  CHECK(average(noisy_var) >= average(clean_var));
}
