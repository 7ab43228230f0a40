#include "oodbench/uq_scores.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "oodbench/error.hpp"

namespace oodbench::uq {

VoxelUncertaintyMap msp_uncertainty(const ProbVolume& p) {
  const std::size_t n = p.voxels();
  std::vector<double> values(n);
  for (std::size_t v = 0; v < n; ++v) {
    double best = p.at(0, v);
    for (int c = 1; c < p.num_classes(); ++c) best = std::max(best, p.at(c, v));
    values[v] = 1.0 - best;
  }
  return {p.grid(), std::move(values), UncertaintyKind::msp};
}

void VarianceAccumulator::add(const ProbVolume& member) { add(member.grid(), member.num_classes(), member.probs()); }

void VarianceAccumulator::add(const Grid& grid, int num_classes, std::span<const double> probs) {
  if (num_classes < 2 || probs.size() != grid.voxels() * static_cast<std::size_t>(num_classes)) {
    throw Error(Errc::shape, "member extent does not match C x shape");
  }
  if (count_ == 0) {
    grid_ = grid;
    classes_ = num_classes;
    mean_.assign(probs.begin(), probs.end());
    m2_.assign(mean_.size(), 0.0);
    count_ = 1;
    return;
  }
  if (num_classes != classes_ || !grid.same_lattice(grid_)) {
    throw Error(Errc::shape, "stack member differs in classes, shape or spacing");
  }
  ++count_;
  const double inv = 1.0 / static_cast<double>(count_);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double x = probs[i];
    const double delta = x - mean_[i];
    mean_[i] += delta * inv;
    m2_[i] += delta * (x - mean_[i]);
  }
}

VoxelUncertaintyMap VarianceAccumulator::finish() const {
  if (count_ < 2) throw Error(Errc::insufficient_data, "variance needs T >= 2 members");
  const std::size_t n = grid_.voxels();
  std::vector<double> values(n, 0.0);
  const double norm = 1.0 / (static_cast<double>(count_) * classes_);
  for (int c = 0; c < classes_; ++c) {
    const double* m2 = m2_.data() + static_cast<std::size_t>(c) * n;
    for (std::size_t v = 0; v < n; ++v) values[v] += std::max(0.0, m2[v]);
  }
  for (auto& x : values) x *= norm;
  return {grid_, std::move(values), UncertaintyKind::variance};
}

ProbVolume VarianceAccumulator::mean() const {
  if (count_ == 0) throw Error(Errc::insufficient_data, "no members accumulated");
  return ProbVolume(grid_, classes_, mean_);
}

VoxelUncertaintyMap variance_uncertainty(const PredictionStack& stack) {
  VarianceAccumulator acc;
  for (const auto& m : stack.members()) acc.add(m);
  return acc.finish();
}

double image_score(const VoxelUncertaintyMap& u, const LabelVolume* mask) {
  if (u.values.empty()) throw Error(Errc::insufficient_data, "empty uncertainty map");
  if (!mask) {
    double sum = 0.0;
    for (double x : u.values) sum += x;
    return sum / static_cast<double>(u.values.size());
  }
  if (mask->shape() != u.grid.shape) throw Error(Errc::shape, "mask shape differs from uncertainty map");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t v = 0; v < u.values.size(); ++v) {
    if ((*mask)[v] > 0) {
      sum += u.values[v];
      ++count;
    }
  }
  if (count == 0) throw Error(Errc::empty_mask, "mask has no positive voxels");
  return sum / static_cast<double>(count);
}

Signature dum_signature(std::span<const ScalarVolume> channels, std::string source_id) {
  if (channels.empty()) throw Error(Errc::parameter, "signature needs at least one channel");
  std::vector<double> features;
  features.reserve(channels.size());
  const Shape& shape = channels.front().shape();
  for (const auto& ch : channels) {
    if (ch.shape() != shape) throw Error(Errc::shape, "feature channels differ in shape");
    double sum = 0.0;
    for (double x : ch.data()) sum += x;
    features.push_back(sum / static_cast<double>(ch.size()));
  }
  return Signature(std::move(features), std::move(source_id));
}

ReferenceSignatureSet::ReferenceSignatureSet(std::vector<Signature> signatures, std::string dataset_id)
    : signatures_(std::move(signatures)), dataset_id_(std::move(dataset_id)) {
  if (signatures_.empty()) throw Error(Errc::insufficient_data, "reference signature set is empty");
  const std::size_t d = signatures_.front().dim();
  for (const auto& s : signatures_) {
    if (s.dim() != d) throw Error(Errc::dimension, "reference signatures differ in dimension");
  }
}

void ReferenceSignatureSet::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << "source_id";
  for (std::size_t d = 0; d < dim(); ++d) out << ",f" << d;
  out << '\n';
  char buf[32];
  for (const auto& s : signatures_) {
    out << s.source_id();
    for (double f : s.features()) {
      std::snprintf(buf, sizeof buf, "%.17g", f);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

ReferenceSignatureSet ReferenceSignatureSet::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::format, path.string() + ": missing header");
  std::vector<Signature> sigs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string id, cell;
    std::getline(row, id, ',');
    std::vector<double> f;
    while (std::getline(row, cell, ',')) {
      try {
        f.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(Errc::format, path.string() + ": bad number '" + cell + "'");
      }
    }
    sigs.emplace_back(std::move(f), std::move(id));
  }
  return ReferenceSignatureSet(std::move(sigs), path.stem().string());
}

Reducer Reducer::parse(std::string_view name, std::size_t k) {
  if (name == "mean") return {Kind::mean, 1};
  if (name == "min") return {Kind::min, 1};
  if (name == "knn") return {Kind::knn, k};
  throw Error(Errc::parameter, "unknown DUM reducer '" + std::string(name) + "' (mean, min, knn)");
}

std::string Reducer::name() const {
  switch (kind) {
    case Kind::mean: return "mean";
    case Kind::min: return "min";
    case Kind::knn: return "knn";
  }
  return "?";
}

double dum_score(const Signature& s, const ReferenceSignatureSet& refs, Reducer reducer) {
  if (s.dim() != refs.dim()) {
    throw Error(Errc::dimension, "signature dimension " + std::to_string(s.dim()) + " vs reference dimension " +
                                     std::to_string(refs.dim()));
  }
  std::vector<double> dist;
  dist.reserve(refs.size());
  for (const auto& r : refs.signatures()) {
    double acc = 0.0;
    for (std::size_t d = 0; d < s.dim(); ++d) {
      const double diff = s.features()[d] - r.features()[d];
      acc += diff * diff;
    }
    dist.push_back(std::sqrt(acc));
  }
  switch (reducer.kind) {
    case Reducer::Kind::min: return *std::min_element(dist.begin(), dist.end());
    case Reducer::Kind::knn: {
      if (reducer.k == 0 || reducer.k > dist.size()) {
        throw Error(Errc::parameter, "kNN k must be in [1, |refs|]");
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(reducer.k), dist.end());
      double sum = 0.0;
      for (std::size_t i = 0; i < reducer.k; ++i) sum += dist[i];
      return sum / static_cast<double>(reducer.k);
    }
    case Reducer::Kind::mean: break;
  }
  double sum = 0.0;
  for (double d : dist) sum += d;
  return sum / static_cast<double>(dist.size());
}

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::msp: return "msp";
    case Method::mc_variance: return "mc-variance";
    case Method::ensemble_variance: return "ensemble-variance";
    case Method::dum: return "dum";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::msp, Method::mc_variance, Method::ensemble_variance, Method::dum}) {
    if (to_string(m) == name) return m;
  }
  throw Error(Errc::usage, "unknown method '" + std::string(name) + "' (msp, mc-variance, ensemble-variance, dum)");
}

double score_method(Method method, const MethodInputs& inputs, const LabelVolume* mask) {
  switch (method) {
    case Method::msp:
      if (const auto* p = std::get_if<const ProbVolume*>(&inputs); p && *p) {
        return image_score(msp_uncertainty(**p), mask);
      }
      throw Error(Errc::usage, "msp needs a probability volume");
    case Method::mc_variance:
    case Method::ensemble_variance:
      if (const auto* s = std::get_if<const PredictionStack*>(&inputs); s && *s) {
        return image_score(variance_uncertainty(**s), mask);
      }
      throw Error(Errc::usage, std::string(to_string(method)) + " needs a prediction stack");
    case Method::dum:
      if (const auto* d = std::get_if<DumInputs>(&inputs); d && d->refs) {
        return dum_score(dum_signature(d->channels), *d->refs, d->reducer);
      }
      throw Error(Errc::usage, "dum needs feature channels and a reference signature set");
  }
  throw Error(Errc::usage, "unknown method");
}

}  // namespace oodbench::uq
