#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

#include "oodbench/artifacts.hpp"
#include "oodbench/config.hpp"
#include "oodbench/error.hpp"
#include "oodbench/harness.hpp"
#include "oodbench/metrics.hpp"
#include "oodbench/nifti.hpp"
#include "oodbench/toy_model.hpp"
#include "oodbench/uq_scores.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace oodbench;

namespace {

using FArray = py::array_t<double, py::array::f_style | py::array::forcecast>;

Shape shape_of(const py::buffer_info& b, int ndim) {
  if (b.ndim != ndim) throw Error(Errc::dimension, "expected a " + std::to_string(ndim) + "-d array");
  return {static_cast<std::size_t>(b.shape[0]), static_cast<std::size_t>(b.shape[1]),
          static_cast<std::size_t>(b.shape[2])};
}

Spacing spacing_of(const std::array<double, 3>& s) { return {s[0], s[1], s[2]}; }

ScalarVolume to_volume(const FArray& a, const std::array<double, 3>& spacing) {
  const auto b = a.request();
  const Shape s = shape_of(b, 3);
  const auto* p = static_cast<const double*>(b.ptr);
  return {make_grid(s, spacing_of(spacing)), std::vector<double>(p, p + s.voxels())};
}

// (nx, ny, nz), Fortran order, so x is fastest like the volume itself.
FArray to_array(const Grid& g, std::span<const double> data) {
  FArray out({g.shape.nx, g.shape.ny, g.shape.nz});
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

FArray to_array(const ScalarVolume& v) { return to_array(v.grid(), v.data()); }

// (nx, ny, nz, C), class last.
ProbVolume to_prob(const FArray& a) {
  const auto b = a.request();
  if (b.ndim != 4) throw Error(Errc::dimension, "expected a 4-d (nx, ny, nz, C) array");
  const Shape s{static_cast<std::size_t>(b.shape[0]), static_cast<std::size_t>(b.shape[1]),
                static_cast<std::size_t>(b.shape[2])};
  const auto* p = static_cast<const double*>(b.ptr);
  const auto c = static_cast<std::size_t>(b.shape[3]);
  return {make_grid(s), static_cast<int>(c), std::vector<double>(p, p + c * s.voxels())};
}

FArray prob_array(const ProbVolume& p) {
  const Shape& s = p.shape();
  FArray out({s.nx, s.ny, s.nz, static_cast<std::size_t>(p.num_classes())});
  std::copy(p.probs().begin(), p.probs().end(), out.mutable_data());
  return out;
}

LabelVolume to_labels(const py::array_t<std::uint16_t, py::array::f_style | py::array::forcecast>& a,
                      int num_classes) {
  const auto b = a.request();
  const Shape s = shape_of(b, 3);
  const auto* p = static_cast<const std::uint16_t*>(b.ptr);
  return {make_grid(s), std::vector<std::uint16_t>(p, p + s.voxels()), num_classes};
}

py::array_t<std::uint16_t, py::array::f_style> label_array(const LabelVolume& v) {
  py::array_t<std::uint16_t, py::array::f_style> out({v.shape().nx, v.shape().ny, v.shape().nz});
  std::copy(v.labels().begin(), v.labels().end(), out.mutable_data());
  return out;
}

artifacts::Spec spec_from(const py::dict& params) {
  auto j = Json::parse(py::str(py::module_::import("json").attr("dumps")(params)).cast<std::string>());
  std::uint64_t seed = 0;
  if (j.contains("seed")) {
    seed = j["seed"].get<std::uint64_t>();
    j.erase("seed");
  }
  auto spec = artifact_from_json(j);
  spec.seed = seed;
  return spec;
}

}  // namespace

PYBIND11_MODULE(_oodbench, m) {
  m.doc() = "OOD benchmark toolkit for 3D segmentation volumes";

  py::register_exception<Error>(m, "OodbenchError", PyExc_ValueError);

  m.def(
      "read_nifti",
      [](const fs::path& path) {
        const auto v = nifti::read_scalar(path);
        const auto& sp = v.spacing();
        return py::make_tuple(to_array(v), std::array<double, 3>{sp.sx, sp.sy, sp.sz});
      },
      py::arg("path"), "Returns (array, spacing).");
  m.def(
      "write_nifti",
      [](const FArray& a, const fs::path& path, std::array<double, 3> spacing) {
        nifti::write_scalar(to_volume(a, spacing), path, nifti::wants_gzip(path));
      },
      py::arg("array"), py::arg("path"), py::arg("spacing") = std::array<double, 3>{1.0, 1.0, 1.0});
  m.def(
      "read_prob", [](const fs::path& path) { return prob_array(nifti::read_prob(path)); }, py::arg("path"));
  m.def(
      "write_prob",
      [](const FArray& p, const fs::path& path) { nifti::write_prob(to_prob(p), path, nifti::wants_gzip(path)); },
      py::arg("probs"), py::arg("path"));

  m.def("artifact_kinds", [] {
    std::vector<std::string> out;
    for (auto k : artifacts::kAllKinds) out.emplace_back(artifacts::to_string(k));
    return out;
  });
  m.def(
      "apply_artifact",
      [](const FArray& a, const std::string& kind, std::uint64_t seed, std::array<double, 3> spacing,
         const py::kwargs& params) {
        py::dict p(params);
        p["kind"] = kind;
        p["seed"] = seed;
        const auto spec = spec_from(p);
        const auto v = to_volume(a, spacing);
        ScalarVolume out;
        {
          py::gil_scoped_release release;
          out = artifacts::apply(v, spec);
        }
        return to_array(out);
      },
      py::arg("array"), py::arg("kind"), py::arg("seed") = 0,
      py::arg("spacing") = std::array<double, 3>{1.0, 1.0, 1.0},
      "Corrupts a volume; severity parameters are keyword arguments.");

  m.def(
      "auroc",
      [](const std::vector<double>& neg, const std::vector<double>& pos) { return metrics::auroc(neg, pos); },
      py::arg("negatives"), py::arg("positives"));
  m.def(
      "dice",
      [](const py::array_t<std::uint16_t, py::array::f_style | py::array::forcecast>& pred,
         const py::array_t<std::uint16_t, py::array::f_style | py::array::forcecast>& truth, int class_id,
         int num_classes) {
        return metrics::dice(to_labels(pred, num_classes), to_labels(truth, num_classes), class_id);
      },
      py::arg("pred"), py::arg("truth"), py::arg("class_id") = 1, py::arg("num_classes") = 2);

  m.def(
      "msp_score", [](const FArray& p) { return uq::image_score(uq::msp_uncertainty(to_prob(p))); },
      py::arg("probs"));
  m.def(
      "variance_score",
      [](const std::vector<FArray>& members) {
        std::vector<ProbVolume> v;
        for (const auto& a : members) v.push_back(to_prob(a));
        return uq::image_score(uq::variance_uncertainty(PredictionStack(std::move(v))));
      },
      py::arg("members"));
  m.def(
      "dum_score",
      [](const std::vector<double>& signature, const std::vector<std::vector<double>>& refs,
         const std::string& reducer, std::size_t k) {
        std::vector<Signature> bank;
        for (const auto& r : refs) bank.emplace_back(r);
        return uq::dum_score(Signature(signature), uq::ReferenceSignatureSet(std::move(bank)),
                             uq::Reducer::parse(reducer, k));
      },
      py::arg("signature"), py::arg("references"), py::arg("reducer") = "mean", py::arg("k") = 5);

  m.def(
      "phantom",
      [](std::uint64_t seed, std::array<std::size_t, 3> shape) {
        toy::PhantomSpec spec;
        spec.seed = seed;
        spec.shape = {shape[0], shape[1], shape[2]};
        const auto ph = toy::make_phantom(spec);
        return py::make_tuple(to_array(ph.image), label_array(ph.labels));
      },
      py::arg("seed") = 0, py::arg("shape") = std::array<std::size_t, 3>{32, 32, 32},
      "Returns (image, labels).");

  m.def(
      "gate",
      [](double score, const std::vector<double>& refs, double pct) {
        const auto g = harness::gate(score, refs, pct);
        return py::make_tuple(g.decision == harness::GateDecision::flag, g.threshold);
      },
      py::arg("score"), py::arg("reference_scores"), py::arg("percentile") = 95.0,
      "Returns (flagged, threshold).");
  m.def(
      "percentile", [](const std::vector<double>& v, double p) { return harness::percentile(v, p); },
      py::arg("values"), py::arg("p"));
}
