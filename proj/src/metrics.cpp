#include "oodbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "oodbench/error.hpp"

namespace oodbench::metrics {

namespace {

void require_finite(std::span<const double> xs, const char* what) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw Error(Errc::data, std::string("non-finite ") + what + " score");
  }
}

}  // namespace

double auroc(std::span<const double> negatives, std::span<const double> positives) {
  if (negatives.empty() || positives.empty()) {
    throw Error(Errc::insufficient_data, "AUROC needs at least one negative and one positive score");
  }
  require_finite(negatives, "negative");
  require_finite(positives, "positive");

  std::vector<double> neg(negatives.begin(), negatives.end());
  std::vector<double> pos(positives.begin(), positives.end());
  std::sort(neg.begin(), neg.end());
  std::sort(pos.begin(), pos.end());

  // Twice the Mann-Whitney U: each (neg < pos) pair counts 2, each tie 1.
  std::uint64_t twice_u = 0;
  std::size_t below = 0;  // negatives strictly below the current positive
  std::size_t upto = 0;   // negatives <= the current positive
  for (double p : pos) {
    while (below < neg.size() && neg[below] < p) ++below;
    if (upto < below) upto = below;
    while (upto < neg.size() && neg[upto] <= p) ++upto;
    twice_u += 2 * below + (upto - below);
  }
  const double pairs = static_cast<double>(neg.size()) * static_cast<double>(pos.size());
  return static_cast<double>(twice_u) / (2.0 * pairs);
}

double dice(const LabelVolume& pred, const LabelVolume& truth, int class_id) {
  if (pred.shape() != truth.shape()) throw Error(Errc::shape, "dice: label volumes differ in shape");
  if (class_id < 0 || class_id >= pred.num_classes() || class_id >= truth.num_classes()) {
    throw Error(Errc::parameter, "dice: class id outside both label schemes");
  }
  std::size_t x = 0, y = 0, both = 0;
  const auto a = pred.labels();
  const auto b = truth.labels();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool in_a = a[i] == class_id;
    const bool in_b = b[i] == class_id;
    x += in_a;
    y += in_b;
    both += in_a && in_b;
  }
  if (x + y == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(x + y);
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::insufficient_data, "mean/std of an empty list");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

}  // namespace oodbench::metrics
