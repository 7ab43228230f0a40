#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "oodbench/config.hpp"
#include "oodbench/manifest.hpp"
#include "oodbench/metrics.hpp"
#include "oodbench/uq_scores.hpp"

// Evaluation protocol: ID phantom sets, artifact datasets, per-case scoring,
// AUROC/DSC aggregation over runs, report tables and the OOD gate.
namespace oodbench::harness {

/// Worker count for n jobs: hardware concurrency capped by OODBENCH_THREADS.
std::size_t worker_count(std::size_t jobs);

/// Runs body(i) for i in [0, n) on worker_count(n) threads. The first
/// exception thrown by any job is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Stream-separated seed from a master seed and a tuple of indices.
std::uint64_t mix_seed(std::uint64_t master, std::initializer_list<std::uint64_t> parts) noexcept;

struct DatasetFile {
  DatasetManifest manifest;
  std::filesystem::path path;  // manifest.json
};

/// Clean phantoms with truth: DIR/reference and DIR/test, one manifest each.
std::pair<DatasetFile, DatasetFile> generate_phantoms(const BenchmarkConfig& cfg, const std::filesystem::path& out_dir);

struct SynthResult {
  std::vector<DatasetFile> datasets;
  std::vector<std::string> warnings;
};

/// One corrupted copy of every ID test image per artifact spec, written to
/// DIR/<kind>/. Image i of every kind uses seed master_seed ^ i.
SynthResult synth_benchmark(const DatasetManifest& id_test, std::span<const artifacts::Spec> specs,
                            const std::filesystem::path& out_dir, std::uint64_t master_seed);

/// Byte-identical file copy of a dataset, relabelled as OOD.
DatasetFile copy_as_control(const DatasetManifest& source, const std::filesystem::path& out_dir,
                            const std::string& dataset_id = "control");

struct CaseScore {
  std::string case_id;
  double score = 0.0;
  std::optional<double> dice;  // lesion DSC when the case has truth and the method segments
};

/// Everything a scorer needs besides the dataset.
struct ScoringContext {
  FlavorConfig flavor;
  ScoringOptions options;
  std::uint64_t seed = 7;
  const uq::ReferenceSignatureSet* refs = nullptr;  // required by dum
};

/// DUM reference bank from the images (or feature files) of a dataset.
uq::ReferenceSignatureSet build_references(const DatasetManifest& reference, const FlavorConfig& flavor);

/// Per-case scores of one method in one run, in case order.
std::vector<CaseScore> score_dataset(const DatasetManifest& m, uq::Method method, const ScoringContext& ctx,
                                     std::size_t run = 0);

void write_scores_csv(std::span<const CaseScore> scores, const std::filesystem::path& path);
std::vector<CaseScore> read_scores_csv(const std::filesystem::path& path);

struct ReportCell {
  std::string dataset;
  uq::Method method = uq::Method::msp;
  std::string flavor;
  std::optional<metrics::MeanStd> auroc;
  std::optional<metrics::MeanStd> dsc;
};

struct EvalReport {
  std::string test_dataset;
  std::vector<std::string> datasets;  // row order; the test set first
  std::vector<uq::Method> methods;
  std::vector<std::string> flavors;
  std::size_t runs = 1;
  std::vector<ReportCell> cells;

  const ReportCell* find(std::string_view dataset, uq::Method method, std::string_view flavor) const;
};

struct EvalInputs {
  DatasetManifest reference;
  DatasetManifest test;
  std::vector<DatasetManifest> ood;
};

/// Scores every dataset once per (flavor, method, run), persists the per-case
/// CSVs under scores_dir/<flavor>/<method>/run<r>/<dataset>.csv and aggregates.
EvalReport run_eval(const EvalInputs& inputs, const BenchmarkConfig& cfg, const std::filesystem::path& scores_dir);

/// Loads the manifests named by the config, or generates the hermetic
/// benchmark under data_dir when the config names none.
EvalInputs prepare_inputs(const BenchmarkConfig& cfg, const std::filesystem::path& data_dir);

enum class ReportFormat { csv, markdown };
/// From the file extension: .csv or .md.
ReportFormat report_format_for(const std::filesystem::path& path);
std::string emit_report(const EvalReport& r, ReportFormat format);

enum class GateDecision { pass, flag };

struct GateResult {
  GateDecision decision = GateDecision::pass;
  double threshold = 0.0;
};

/// Linear-interpolation quantile, p in [0, 100].
double percentile(std::span<const double> values, double p);
/// Flags when score exceeds the percentile of the reference scores.
GateResult gate(double score, std::span<const double> reference_scores, double pct = 95.0);

struct DemoResult {
  EvalReport report;
  std::filesystem::path markdown;
  std::filesystem::path csv;
};

/// Hermetic end-to-end run with the default configuration.
DemoResult run_demo(const std::filesystem::path& out_dir, std::uint64_t seed = 7);

}  // namespace oodbench::harness
