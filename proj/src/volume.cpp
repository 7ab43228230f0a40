#include "oodbench/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "oodbench/error.hpp"

namespace oodbench {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::parameter: return "parameter";
    case Errc::shape: return "shape";
    case Errc::dimension: return "dimension";
    case Errc::format: return "format";
    case Errc::unsupported_datatype: return "unsupported-datatype";
    case Errc::io: return "I/O";
    case Errc::invalid_probability: return "invalid-probability";
    case Errc::insufficient_data: return "insufficient-data";
    case Errc::data: return "data";
    case Errc::empty_mask: return "empty-mask";
    case Errc::usage: return "usage";
    case Errc::config: return "configuration";
  }
  return "unknown";
}

namespace {

void check_grid(const Grid& g) {
  if (g.shape.nx == 0 || g.shape.ny == 0 || g.shape.nz == 0) {
    throw Error(Errc::shape, "volume shape must be positive in every axis");
  }
  for (int a = 0; a < 3; ++a) {
    if (!(g.spacing[a] > 0.0) || !std::isfinite(g.spacing[a])) {
      throw Error(Errc::parameter, "voxel spacing must be finite and > 0");
    }
  }
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

Grid make_grid(Shape shape, Spacing spacing) {
  Grid g{shape, spacing, {}};
  check_grid(g);
  return g;
}

ScalarVolume::ScalarVolume(Grid grid, std::vector<double> data)
    : grid_(std::move(grid)), data_(std::move(data)) {
  check_grid(grid_);
  if (data_.size() != grid_.voxels()) {
    throw Error(Errc::shape, "scalar data extent " + std::to_string(data_.size()) +
                                 " does not match shape (" + std::to_string(grid_.voxels()) + " voxels)");
  }
}

bool ScalarVolume::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

LabelVolume::LabelVolume(Grid grid, std::vector<std::uint16_t> labels, int num_classes)
    : grid_(std::move(grid)), labels_(std::move(labels)), num_classes_(num_classes) {
  check_grid(grid_);
  if (num_classes_ < 2) throw Error(Errc::parameter, "label volume needs at least 2 classes");
  if (labels_.size() != grid_.voxels()) {
    throw Error(Errc::shape, "label data extent does not match shape");
  }
  for (auto l : labels_) {
    if (l >= num_classes_) {
      throw Error(Errc::parameter, "label " + std::to_string(l) + " >= num_classes " +
                                       std::to_string(num_classes_));
    }
  }
}

std::size_t LabelVolume::count(int class_id) const noexcept {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), class_id));
}

ProbVolume::ProbVolume(Grid grid, int num_classes, std::vector<double> probs)
    : grid_(std::move(grid)), num_classes_(num_classes), probs_(std::move(probs)) {
  check_grid(grid_);
  if (num_classes_ < 2) throw Error(Errc::parameter, "probability volume needs at least 2 classes");
  if (probs_.size() != grid_.voxels() * static_cast<std::size_t>(num_classes_)) {
    throw Error(Errc::shape, "probability data extent does not match C x shape");
  }
}

std::optional<Violation> validate(const Grid& grid, int num_classes, std::span<const double> probs) {
  const std::size_t n = grid.voxels();
  if (num_classes < 2 || probs.size() != n * static_cast<std::size_t>(num_classes)) {
    return Violation{Violation::Kind::shape_mismatch, 0,
                     "shape mismatch: " + std::to_string(probs.size()) + " values for " +
                         std::to_string(num_classes) + " classes x " + std::to_string(n) + " voxels"};
  }
  for (std::size_t v = 0; v < n; ++v) {
    double sum = 0.0;
    for (int c = 0; c < num_classes; ++c) {
      const double p = probs[static_cast<std::size_t>(c) * n + v];
      if (!std::isfinite(p)) {
        return Violation{Violation::Kind::non_finite, v, "non-finite value at voxel " + std::to_string(v)};
      }
      if (p < 0.0 || p > 1.0) {
        return Violation{Violation::Kind::out_of_range, v,
                         "probability " + format_number(p) + " outside [0, 1] at voxel " + std::to_string(v)};
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kProbSumTolerance) {
      return Violation{Violation::Kind::sum_mismatch, v,
                       "per-voxel sum " + format_number(sum) + " at voxel " + std::to_string(v)};
    }
  }
  return std::nullopt;
}

std::optional<Violation> validate(const ProbVolume& p) {
  return validate(p.grid(), p.num_classes(), p.probs());
}

LabelVolume argmax_labels(const ProbVolume& p) {
  const std::size_t n = p.voxels();
  std::vector<std::uint16_t> labels(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    int best = 0;
    double best_p = p.at(0, v);
    for (int c = 1; c < p.num_classes(); ++c) {
      const double q = p.at(c, v);
      if (q > best_p) {
        best = c;
        best_p = q;
      }
    }
    labels[v] = static_cast<std::uint16_t>(best);
  }
  return LabelVolume(p.grid(), std::move(labels), p.num_classes());
}

ProbVolume one_hot(const LabelVolume& labels) {
  const std::size_t n = labels.size();
  std::vector<double> probs(n * static_cast<std::size_t>(labels.num_classes()), 0.0);
  for (std::size_t v = 0; v < n; ++v) probs[labels[v] * n + v] = 1.0;
  return ProbVolume(labels.grid(), labels.num_classes(), std::move(probs));
}

PredictionStack::PredictionStack(std::vector<ProbVolume> members) : members_(std::move(members)) {
  if (members_.size() < 2) throw Error(Errc::parameter, "prediction stack needs T >= 2 members");
  const auto& first = members_.front();
  for (const auto& m : members_) {
    if (m.num_classes() != first.num_classes() || !m.grid().same_lattice(first.grid())) {
      throw Error(Errc::shape, "prediction stack members differ in classes, shape or spacing");
    }
  }
}

Signature::Signature(std::vector<double> features, std::string source_id)
    : features_(std::move(features)), source_id_(std::move(source_id)) {
  if (features_.empty()) throw Error(Errc::dimension, "signature must have D > 0 components");
  for (double f : features_) {
    if (!std::isfinite(f)) throw Error(Errc::data, "signature component is not finite");
  }
}

}  // namespace oodbench
