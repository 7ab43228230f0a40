#include <doctest.h>

#include <limits>
#include <random>

#include "oodbench/metrics.hpp"
#include "support.hpp"

using namespace oodbench;
using namespace oodbench::metrics;
using testing::error_code;

namespace {

// Scores on a coarse grid so ties are common.
std::vector<double> coarse_scores(std::mt19937_64& gen, std::size_t n) {
  std::uniform_int_distribution<int> d(0, 20);
  std::vector<double> v(n);
  for (auto& x : v) x = d(gen) * 0.05;
  return v;
}

LabelVolume labels(Shape s, std::vector<std::uint16_t> l, int c) { return {make_grid(s), std::move(l), c}; }

}  // namespace

TEST_CASE("auroc examples") {
  CHECK(auroc(std::vector<double>{0.1, 0.2}, std::vector<double>{0.3, 0.4}) == 1.0);
  CHECK(auroc(std::vector<double>{0.1, 0.3}, std::vector<double>{0.2, 0.4}) == 0.75);
  CHECK(auroc(std::vector<double>{0.5}, std::vector<double>{0.5}) == 0.5);
  CHECK(auroc(std::vector<double>{0.9}, std::vector<double>{0.1}) == 0.0);
  CHECK(auroc(ScoreSample{{0.0, 0.0, 0.0}, {1.0, 1.0}}) == 1.0);
}

TEST_CASE("auroc errors") {
  const std::vector<double> some{1.0, 2.0}, none;
  CHECK(error_code([&] { auroc(none, some); }) == Errc::insufficient_data);
  CHECK(error_code([&] { auroc(some, none); }) == Errc::insufficient_data);
  const std::vector<double> nan{1.0, std::numeric_limits<double>::quiet_NaN()};
  const std::vector<double> inf{std::numeric_limits<double>::infinity()};
  CHECK(error_code([&] { auroc(nan, some); }) == Errc::data);
  CHECK(error_code([&] { auroc(some, inf); }) == Errc::data);
}

TEST_CASE("auroc equals brute-force pair counting") {
  std::mt19937_64 gen(17);
  std::uniform_int_distribution<std::size_t> size(1, 200);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = size(gen), m = size(gen);
    std::vector<double> neg, pos;
    if (trial % 2 == 0) {
      neg = coarse_scores(gen, n);
      pos = coarse_scores(gen, m);
    } else {
      for (std::size_t i = 0; i < n; ++i) neg.push_back(normal(gen));
      for (std::size_t i = 0; i < m; ++i) pos.push_back(normal(gen) + 0.5);
    }
    const double a = auroc(neg, pos);
    CHECK(a == testing::pair_count_auroc(neg, pos));
    CHECK(a + auroc(pos, neg) == 1.0);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("auroc is a rank statistic") {
  std::mt19937_64 gen(19);
  for (int trial = 0; trial < 100; ++trial) {
    auto neg = coarse_scores(gen, 1 + trial % 37);
    auto pos = coarse_scores(gen, 1 + trial % 23);
    const double a = auroc(neg, pos);
    auto map = [](std::vector<double> v, auto f) {
      for (auto& x : v) x = f(x);
      return v;
    };
    auto ex = [](double x) { return std::exp(x); };
    auto aff = [](double x) { return 3.0 * x + 7.0; };
    CHECK(auroc(map(neg, ex), map(pos, ex)) == a);
    CHECK(auroc(map(neg, aff), map(pos, aff)) == a);
  }
}

TEST_CASE("dice examples") {
  const Shape s{4, 2, 1};
  const auto a = labels(s, {1, 1, 1, 1, 0, 0, 0, 0}, 2);
  const auto b = labels(s, {0, 0, 1, 1, 1, 1, 0, 0}, 2);
  const auto c = labels(s, {0, 0, 0, 0, 1, 1, 1, 1}, 2);
  CHECK(dice(a, a, 1) == 1.0);
  CHECK(dice(a, c, 1) == 0.0);
  CHECK(dice(a, b, 1) == 0.5);
  const auto bg = labels(s, {0, 0, 0, 0, 0, 0, 0, 0}, 2);
  CHECK(dice(bg, bg, 1) == 1.0);
  CHECK(dice(bg, a, 1) == 0.0);
  CHECK(error_code([&] { dice(a, labels({8, 1, 1}, {0, 0, 0, 0, 0, 0, 0, 0}, 2), 1); }) == Errc::shape);
  CHECK(error_code([&] { dice(a, a, 2); }) == Errc::parameter);
}

TEST_CASE("dice is symmetric, bounded and matches set counting") {
  std::mt19937_64 gen(23);
  std::uniform_int_distribution<int> lab(0, 3);
  const Shape s{5, 4, 3};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::uint16_t> x(s.voxels()), y(s.voxels());
    for (auto& v : x) v = static_cast<std::uint16_t>(lab(gen));
    for (auto& v : y) v = static_cast<std::uint16_t>(lab(gen));
    const auto a = labels(s, x, 4), b = labels(s, y, 4);
    for (int c = 0; c < 4; ++c) {
      const double d = dice(a, b, c);
      CHECK(d == dice(b, a, c));
      CHECK(d >= 0.0);
      CHECK(d <= 1.0);
      std::size_t nx = 0, ny = 0, both = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        nx += x[i] == c;
        ny += y[i] == c;
        both += x[i] == c && y[i] == c;
      }
      CHECK(d == (nx + ny == 0 ? 1.0 : 2.0 * both / static_cast<double>(nx + ny)));
    }
  }
}

TEST_CASE("mean and population std") {
  const std::vector<double> a{0.5, 0.5, 0.5}, b{0.0, 1.0}, c{0.7}, none;
  CHECK(mean_std(a).mean == 0.5);
  CHECK(mean_std(a).std == 0.0);
  CHECK(mean_std(b).mean == 0.5);
  CHECK(mean_std(b).std == 0.5);
  CHECK(mean_std(c).mean == 0.7);
  CHECK(mean_std(c).std == 0.0);
  CHECK(error_code([&] { mean_std(none); }) == Errc::insufficient_data);
}
