#include <doctest.h>

#include <numbers>

#include "oodbench/artifacts.hpp"
#include "oodbench/error.hpp"
#include "oodbench/fft.hpp"
#include "support.hpp"

using namespace oodbench;
using namespace oodbench::artifacts;
using testing::error_code;

namespace {

const Shape kSmall{12, 10, 8};

double mean_abs_diff(const ScalarVolume& a, const ScalarVolume& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double sum(const ScalarVolume& v) {
  double s = 0.0;
  for (double x : v.data()) s += x;
  return s;
}

ScalarVolume impulse(Shape s, std::size_t x, std::size_t y, std::size_t z, double value = 1.0) {
  std::vector<double> d(s.voxels(), 0.0);
  d[x + s.nx * (y + s.ny * z)] = value;
  return testing::filled(s, std::move(d));
}

}  // namespace

TEST_CASE("kind and axis names round trip") {
  for (Kind k : kAllKinds) CHECK(parse_kind(to_string(k)) == k);
  CHECK(to_string(Kind::truncation) == "truncation");
  CHECK(error_code([] { parse_kind("blur"); }) == Errc::parameter);
  CHECK(parse_axis("y") == Axis::y);
  CHECK(error_code([] { parse_axis("w"); }) == Errc::parameter);
}

TEST_CASE("every kind preserves grid, stays finite and is deterministic") {
  const auto v = testing::random_volume(kSmall, 5, 0.0, 200.0, {1.0, 1.2, 2.0});
  for (Kind k : kAllKinds) {
    CAPTURE(to_string(k));
    const Spec spec = default_spec(k, 1234);
    const auto a = apply(v, spec);
    const auto b = apply(v, spec);
    CHECK(a.shape() == v.shape());
    CHECK(a.spacing() == v.spacing());
    CHECK(a.all_finite());
    CHECK(a == b);
  }
}

TEST_CASE("invalid severities raise parameter errors") {
  const auto v = testing::constant_volume({4, 4, 4}, 1.0);
  CHECK(error_code([&] { downsample(v, 0.5, Axis::z); }) == Errc::parameter);
  CHECK(error_code([&] { bias(v, -1, 0.5, 0); }) == Errc::parameter);
  CHECK(error_code([&] { bias(v, 3, -0.1, 0); }) == Errc::parameter);
  CHECK(error_code([&] { motion(v, 0, 1.0, 1.0, 0); }) == Errc::parameter);
  CHECK(error_code([&] { motion(v, 1, -1.0, 1.0, 0); }) == Errc::parameter);
  CHECK(error_code([&] { spikes(v, 0, 0.5, 0); }) == Errc::parameter);
  CHECK(error_code([&] { spikes(v, 1, -0.5, 0); }) == Errc::parameter);
  CHECK(error_code([&] { noise(v, -1.0, 0); }) == Errc::parameter);
  CHECK(error_code([&] { ghost(v, 0, Axis::y, 0.5); }) == Errc::parameter);
  CHECK(error_code([&] { ghost(v, 2, Axis::y, 1.5); }) == Errc::parameter);
  CHECK(error_code([&] { truncation(v, 0.5, 0); }) == Errc::parameter);
  CHECK(error_code([&] { truncation(v, 0.0, 0); }) == Errc::parameter);
  CHECK(error_code([&] { scale(v, 0.0); }) == Errc::parameter);
  CHECK(error_code([&] { apply(v, Spec{NoiseParams{-2.0}, 0}); }) == Errc::parameter);
}

TEST_CASE("identity parameters reproduce the input") {
  const auto v = testing::random_volume(kSmall, 6, -50.0, 300.0);
  CHECK(downsample(v, 1.0, Axis::z) == v);
  CHECK(bias(v, 3, 0.0, 9) == v);
  CHECK(noise(v, 0.0, 9) == v);
  CHECK(scale(v, 1.0) == v);
  CHECK(testing::max_rel_diff(ghost(v, 3, Axis::y, 0.0).data(), v.data()) < 1e-5);
  CHECK(testing::max_rel_diff(motion(v, 2, 0.0, 0.0, 9).data(), v.data()) < 1e-5);
  CHECK(testing::max_rel_diff(spikes(v, 2, 0.0, 9).data(), v.data()) < 1e-5);
}

TEST_CASE("different seeds change the stochastic kinds") {
  const auto v = testing::random_volume(kSmall, 7, 0.0, 100.0);
  for (Kind k : {Kind::bias, Kind::motion, Kind::spikes, Kind::noise}) {
    CAPTURE(to_string(k));
    CHECK_FALSE(apply(v, default_spec(k, 1)) == apply(v, default_spec(k, 2)));
  }
}

TEST_CASE("downsample keeps constants") {
  const auto c = testing::constant_volume({7, 9, 11}, 42.5);
  for (Axis a : {Axis::x, Axis::y, Axis::z}) {
    for (double f : {2.0, 3.0, 1.7}) {
      const auto out = downsample(c, f, a);
      for (double x : out.data()) CHECK(x == doctest::Approx(42.5).epsilon(1e-14));
    }
  }
}

TEST_CASE("downsample by 4 of an impulse matches the hand-computed line") {
  // Line of 9 samples, coarse nodes at 0, 4, 8; impulse at 2.
  // Node weights: (0.5, 0.5, 0) over column sums (2.5, 4, 2.5) -> coarse (0.2, 0.125, 0).
  const std::vector<double> expected{0.2, 0.18125, 0.1625, 0.14375, 0.125, 0.09375, 0.0625, 0.03125, 0.0};
  const auto z_line = downsample(impulse({3, 4, 9}, 1, 2, 2), 4.0, Axis::z);
  const auto x_line = downsample(impulse({9, 3, 2}, 2, 1, 1), 4.0, Axis::x);
  const auto y_line = downsample(impulse({2, 9, 3}, 0, 2, 2), 4.0, Axis::y);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(z_line.at(1, 2, i) == doctest::Approx(expected[i]).epsilon(1e-12));
    CHECK(x_line.at(i, 1, 1) == doctest::Approx(expected[i]).epsilon(1e-12));
    CHECK(y_line.at(0, i, 2) == doctest::Approx(expected[i]).epsilon(1e-12));
  }
  CHECK(std::abs(sum(z_line) - 1.0) < 1e-6);
  double off_line = 0.0;
  for (std::size_t z = 0; z < 9; ++z)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 3; ++x)
        if (x != 1 || y != 2) off_line += std::abs(z_line.at(x, y, z));
  CHECK(off_line == 0.0);
}

TEST_CASE("downsample preserves the total of random volumes") {
  const auto v = testing::random_volume({10, 11, 13}, 8, 0.0, 10.0);
  for (double f : {1.5, 2.0, 4.0, 20.0}) {
    CHECK(std::abs(sum(downsample(v, f, Axis::z)) - sum(v)) <= 1e-6 * sum(v));
  }
}

TEST_CASE("bias field") {
  const auto v = testing::random_volume({6, 5, 4}, 9, 1.0, 10.0);
  CHECK(bias_term_count(0) == 1);
  CHECK(bias_term_count(1) == 4);
  CHECK(bias_term_count(3) == 20);
  const auto coeffs = bias_coefficients(3, 0.5, 77);
  REQUIRE(coeffs.size() == 20);
  for (double c : coeffs) {
    CHECK(c >= -0.5);
    CHECK(c <= 0.5);
  }
  CHECK(bias(v, 3, 0.5, 77) == apply_bias_field(v, 3, coeffs));

  const std::vector<double> constant{0.3};
  const auto c0 = apply_bias_field(v, 0, constant);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(c0[i] == doctest::Approx(v[i] * std::exp(0.3)).epsilon(1e-14));

  // terms in (i, j, k) order for order 1: 1, z, y, x
  const double a = 0.2, b = -0.7;
  const std::vector<double> linear{a, 0.0, 0.0, b};
  const auto lx = apply_bias_field(v, 1, linear);
  for (std::size_t z = 0; z < 4; ++z)
    for (std::size_t y = 0; y < 5; ++y)
      for (std::size_t x = 0; x < 6; ++x) {
        const double xn = -1.0 + 2.0 * static_cast<double>(x) / 5.0;
        CHECK(lx.at(x, y, z) == doctest::Approx(v.at(x, y, z) * std::exp(a + b * xn)).epsilon(1e-13));
      }

  CHECK(error_code([&] { apply_bias_field(v, 1, constant); }) == Errc::parameter);
}

TEST_CASE("motion sampling stays within bounds") {
  const auto m = sample_motions(3, 10.0, 6.0, 5);
  REQUIRE(m.size() == 3);
  for (const auto& t : m) {
    for (double r : t.rotation_deg) CHECK(std::abs(r) <= 10.0);
    for (double d : t.translation_mm) CHECK(std::abs(d) <= 6.0);
  }
  CHECK(motion_band(0, 3, 9) == std::pair<std::size_t, std::size_t>{0, 3});
  CHECK(motion_band(2, 3, 9) == std::pair<std::size_t, std::size_t>{6, 9});
}

TEST_CASE("motion of a constant volume by translation is a no-op") {
  const auto c = testing::constant_volume({10, 10, 10}, 17.0);
  const auto out = motion(c, 1, 0.0, 6.0, 3);
  for (double x : out.data()) CHECK(std::abs(x - 17.0) <= 1e-5 * 17.0);
}

TEST_CASE("rigid move by whole voxels is a shift with edge clamp") {
  const auto v = testing::random_volume({6, 5, 4}, 10);
  RigidMotion m;
  m.translation_mm = {1.0, 0.0, 0.0};
  const auto out = move_rigid(v, m);
  for (std::size_t z = 0; z < 4; ++z)
    for (std::size_t y = 0; y < 5; ++y)
      for (std::size_t x = 0; x < 6; ++x) CHECK(out.at(x, y, z) == v.at(x == 0 ? 0 : x - 1, y, z));
}

TEST_CASE("motion band of a half-voxel x shift carries the phase-shifted cosine") {
  // f(x) = cos(theta (x + 1/2)) is symmetric about -1/2, so the edge clamp agrees
  // with periodic interpolation and the moved copy is cos(theta/2) cos(theta x).
  const Shape s{8, 2, 8};
  const double N = 8.0, k0 = 1.0, theta = 2.0 * std::numbers::pi * k0 / N;
  auto h = [](double z) { return 1.0 + 0.5 * std::cos(2.0 * std::numbers::pi * z / 8.0) +
                                 0.3 * std::sin(2.0 * std::numbers::pi * 3.0 * z / 8.0); };
  std::vector<double> data(s.voxels());
  for (std::size_t z = 0; z < 8; ++z)
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 8; ++x) data[x + 8 * (y + 2 * z)] = std::cos(theta * (x + 0.5)) * h(z);
  const auto v = testing::filled(s, data);

  RigidMotion m;
  m.translation_mm = {0.5, 0.0, 0.0};
  const std::vector<RigidMotion> transforms{m};
  const auto out = motion_from_transforms(v, transforms);

  // closed-form spectrum of the cosine along x
  auto cosine_bin = [&](std::size_t kx) -> std::complex<double> {
    const long f = fft::signed_frequency(kx, 8);
    if (f == static_cast<long>(k0)) return 0.5 * N * std::polar(1.0, theta / 2.0);
    if (f == -static_cast<long>(k0)) return 0.5 * N * std::polar(1.0, -theta / 2.0);
    return 0.0;
  };
  std::vector<std::complex<double>> hz(8);
  for (std::size_t k = 0; k < 8; ++k)
    for (std::size_t z = 0; z < 8; ++z) hz[k] += h(z) * std::polar(1.0, -2.0 * std::numbers::pi * k * z / 8.0);

  const auto [first, last] = motion_band(1, 2, 8);
  std::vector<bool> moved_band(8, false);
  for (std::size_t c = first; c < last; ++c) moved_band[fft::centered_to_bin(c, 8)] = true;

  std::vector<std::complex<double>> stitched(s.voxels());
  for (std::size_t kz = 0; kz < 8; ++kz)
    for (std::size_t kx = 0; kx < 8; ++kx) {
      std::complex<double> cx = cosine_bin(kx);
      if (moved_band[kz]) {
        const double f = static_cast<double>(fft::signed_frequency(kx, 8));
        // half-voxel delay times the linear-interpolation response
        cx *= std::polar(1.0, -std::numbers::pi * f / N) * std::cos(std::numbers::pi * f / N);
      }
      stitched[kx + 8 * (0 + 2 * kz)] = cx * 2.0 * hz[kz];
    }
  const auto expected = testing::naive_idft_real(stitched, s);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] - expected[i]) < 1e-9);
  CHECK(testing::max_rel_diff(out.data(), v.data()) > 1e-3);
}

TEST_CASE("a single k-space spike on a zero volume is a plane wave") {
  const Shape s{6, 5, 4};
  const auto zero = testing::constant_volume(s, 0.0);
  const KSpaceSpike spike{{2, 1, 3}, std::polar(120.0, 0.7)};
  const std::vector<KSpaceSpike> list{spike};
  const auto out = add_kspace_spikes(zero, list);
  const double n = static_cast<double>(s.voxels());
  for (std::size_t z = 0; z < 4; ++z)
    for (std::size_t y = 0; y < 5; ++y)
      for (std::size_t x = 0; x < 6; ++x) {
        const double ph = 2.0 * std::numbers::pi * (2.0 * x / 6.0 + 1.0 * y / 5.0 + 3.0 * z / 4.0);
        CHECK(out.at(x, y, z) == doctest::Approx(120.0 * std::cos(ph + 0.7) / n).epsilon(1e-12).scale(1.0));
      }
  const std::vector<KSpaceSpike> outside{{{6, 0, 0}, 1.0}};
  CHECK(error_code([&] { add_kspace_spikes(zero, outside); }) == Errc::parameter);
}

TEST_CASE("spikes add one off-DC bin of magnitude intensity times kmax") {
  const auto v = testing::random_volume({8, 7, 6}, 11, 0.0, 50.0);
  const auto before = fft::forward(v);
  double kmax = 0.0;
  for (const auto& c : before.bins) kmax = std::max(kmax, std::abs(c));
  const auto after = fft::forward(spikes(v, 1, 0.5, 21));
  // the real part splits the spike between its bin and the mirrored bin
  std::vector<double> diffs;
  for (std::size_t i = 0; i < after.bins.size(); ++i) {
    const double d = std::abs(after.bins[i] - before.bins[i]);
    if (d > 1e-6 * kmax) diffs.push_back(d);
  }
  CHECK(std::abs(after.bins[0] - before.bins[0]) < 1e-6 * kmax);
  REQUIRE((diffs.size() == 1 || diffs.size() == 2));
  double total = 0.0;
  for (double d : diffs) total += d;
  CHECK(total == doctest::Approx(0.5 * kmax).epsilon(1e-9));
}

TEST_CASE("noise statistics") {
  const auto zero = testing::constant_volume({64, 64, 64}, 0.0);
  const auto a = noise(zero, 10.0, 1);
  double s = 0.0, ss = 0.0;
  for (double x : a.data()) {
    s += x;
    ss += x * x;
  }
  const double n = static_cast<double>(a.size());
  const double mean = s / n;
  const double sd = std::sqrt(ss / n - mean * mean);
  CHECK(sd >= 9.5);
  CHECK(sd <= 10.5);
  CHECK(std::abs(mean) < 0.1);

  const auto b = noise(zero, 10.0, 2);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < a.size(); ++i) differ += a[i] != b[i];
  CHECK(static_cast<double>(differ) > 0.99 * n);
}

TEST_CASE("ghost with full intensity on an impulse, checked against the direct DFT") {
  // even non-DC frequencies removed: 1/N + (delta(x0) - delta(x0 + N/2)) / 2
  const Shape s{8, 3, 2};
  std::vector<double> d(s.voxels(), 0.0);
  for (std::size_t z = 0; z < 2; ++z)
    for (std::size_t y = 0; y < 3; ++y) d[1 + 8 * (y + 3 * z)] = 1.0;
  const auto v = testing::filled(s, d);
  const auto out = ghost(v, 2, Axis::x, 1.0);

  auto k = testing::naive_dft(v);
  for (std::size_t z = 0; z < 2; ++z)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 8; ++x) {
        const long f = fft::signed_frequency(x, 8);
        if (f != 0 && f % 2 == 0) k[x + 8 * (y + 3 * z)] = 0.0;
      }
  const auto oracle = testing::naive_idft_real(k, s);
  for (std::size_t z = 0; z < 2; ++z)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 8; ++x) {
        const double closed = 0.125 + (x == 1 ? 0.5 : x == 5 ? -0.5 : 0.0);
        CHECK(out.at(x, y, z) == doctest::Approx(closed).epsilon(1e-12).scale(1.0));
        CHECK(oracle[x + 8 * (y + 3 * z)] == doctest::Approx(closed).epsilon(1e-12).scale(1.0));
      }
}

TEST_CASE("ghost keeps the mean for any intensity and axis") {
  const auto v = testing::random_volume(kSmall, 12, 0.0, 100.0);
  const double m = sum(v);
  for (Axis a : {Axis::x, Axis::y, Axis::z})
    for (double in : {0.1, 0.5, 1.0}) CHECK(std::abs(sum(ghost(v, 3, a, in)) - m) <= 1e-6 * m);
}

TEST_CASE("ghost scales exactly the planes at multiples of the ghost count") {
  const auto v = testing::random_volume({6, 9, 4}, 13);
  const auto before = fft::forward(v);
  const auto after = fft::forward(ghost(v, 3, Axis::y, 0.4));
  for (std::size_t kz = 0; kz < 4; ++kz)
    for (std::size_t ky = 0; ky < 9; ++ky)
      for (std::size_t kx = 0; kx < 6; ++kx) {
        const long f = fft::signed_frequency(ky, 9);
        const double g = (f != 0 && f % 3 == 0) ? 0.6 : 1.0;
        CHECK(std::abs(after.at(kx, ky, kz) - g * before.at(kx, ky, kz)) < 1e-9 * (1.0 + std::abs(before.at(kx, ky, kz))));
      }
}

TEST_CASE("truncation zero-fills top and bottom slices") {
  const auto v = testing::random_volume({4, 3, 5}, 14, 1.0, 2.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto out = truncation(v, 0.2, seed);
    CHECK(out.shape() == v.shape());
    for (std::size_t z = 0; z < 5; ++z)
      for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 4; ++x) {
          if (z == 0 || z == 4) CHECK(out.at(x, y, z) == 0.0);
          else CHECK(out.at(x, y, z) == v.at(x, y, z));
        }
  }

  const auto tall = testing::random_volume({3, 3, 40}, 15, 0.0, 1.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto out = truncation(tall, 0.2, seed);
    CHECK(sum(out) <= sum(tall));
    std::size_t bottom = 0, top = 0;
    while (out.at(0, 0, bottom) == 0.0 && out.at(2, 2, bottom) == 0.0) ++bottom;
    while (out.at(0, 0, 39 - top) == 0.0 && out.at(2, 2, 39 - top) == 0.0) ++top;
    CHECK(bottom >= 1);
    CHECK(bottom <= 8);
    CHECK(top >= 1);
    CHECK(top <= 8);
    for (std::size_t z = bottom; z < 40 - top; ++z) CHECK(out.at(1, 1, z) == tall.at(1, 1, z));
  }
}

TEST_CASE("scale about the center") {
  const auto c = testing::constant_volume({9, 8, 7}, 3.0);
  const auto up = scale(c, 2.0);
  for (double x : up.data()) CHECK(x == doctest::Approx(3.0).epsilon(1e-14));

  const Shape s{9, 9, 9};
  const auto imp = impulse(s, 4, 4, 4, 5.0);
  const auto out = scale(imp, 0.5);
  CHECK(out.at(4, 4, 4) == 5.0);
  CHECK(sum(out) == 5.0);

  // shrink: the border is padded with zeros
  const auto shrunk = scale(c, 0.5);
  CHECK(shrunk.at(0, 0, 0) == 0.0);
  CHECK(shrunk.at(4, 4, 3) == doctest::Approx(3.0));
}

TEST_CASE("severity monotonicity on a fixed seed and input") {
  const auto v = testing::random_volume(kSmall, 16, 0.0, 100.0);
  double prev = -1.0;
  for (double sd : {0.0, 1.0, 5.0, 20.0}) {
    const double d = mean_abs_diff(noise(v, sd, 3), v);
    CHECK(d >= prev);
    prev = d;
  }
  prev = -1.0;
  for (double in : {0.0, 0.3, 0.6, 1.0}) {
    const double d = mean_abs_diff(ghost(v, 2, Axis::y, in), v);
    CHECK(d >= prev - 1e-12);
    prev = d;
  }
  prev = -1.0;
  for (double in : {0.0, 0.2, 0.5, 1.0}) {
    const double d = mean_abs_diff(spikes(v, 2, in, 3), v);
    CHECK(d >= prev - 1e-12);
    prev = d;
  }
}
