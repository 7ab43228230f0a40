#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "oodbench/config.hpp"
#include "oodbench/error.hpp"
#include "oodbench/harness.hpp"

namespace fs = std::filesystem;
using namespace oodbench;

namespace {

BenchmarkConfig config_or_defaults(const std::string& path) {
  return path.empty() ? BenchmarkConfig::defaults() : load_config(path);
}

FlavorConfig pick_flavor(const BenchmarkConfig& cfg, const std::string& name) {
  if (name.empty()) return cfg.flavors.front();
  for (const auto& f : cfg.flavors) {
    if (f.name == name) return f;
  }
  if (name == "external") {
    FlavorConfig f;
    f.name = name;
    f.external = true;
    f.model.prototypes.clear();
    return f;
  }
  throw Error(Errc::usage, "unknown model flavor '" + name + "'");
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-based OOD detection benchmark for volumetric segmentation"};
  app.require_subcommand(1);

  std::string config, out, manifest, method, refs, flavor;
  std::uint64_t seed = 7;
  std::size_t runs = 0, run = 0;
  bool mask = false;
  double score = 0.0, pct = 95.0;

  auto* phantom = app.add_subcommand("phantom", "Generate ID reference and test phantom datasets");
  phantom->add_option("--config", config, "Benchmark config (JSON)");
  phantom->add_option("--out", out, "Output directory")->required();

  auto* synth = app.add_subcommand("synth", "Produce one artifact dataset per configured kind");
  synth->add_option("--manifest", manifest, "ID test manifest")->required();
  synth->add_option("--config", config, "Benchmark config (JSON)");
  synth->add_option("--out", out, "Output directory")->required();
  auto* synth_seed = synth->add_option("--seed", seed, "Master seed (default: config seed)");

  auto* sigs = app.add_subcommand("refs", "Build a DUM reference signature CSV from a dataset");
  sigs->add_option("--manifest", manifest, "Reference manifest")->required();
  sigs->add_option("--config", config, "Benchmark config (JSON)");
  sigs->add_option("--flavor", flavor, "Model flavor (binary, multiclass, external)");
  sigs->add_option("--out", out, "Signature CSV")->required();

  auto* score_cmd = app.add_subcommand("score", "Per-case image-level uncertainty scores");
  score_cmd->add_option("--manifest", manifest, "Dataset manifest")->required();
  score_cmd->add_option("--method", method, "msp | mc-variance | ensemble-variance | dum")->required();
  score_cmd->add_option("--refs", refs, "Reference signature CSV (dum)");
  score_cmd->add_flag("--mask", mask, "Average over truth > 0 only");
  score_cmd->add_option("--out", out, "Scores CSV")->required();
  score_cmd->add_option("--config", config, "Benchmark config (JSON)");
  score_cmd->add_option("--flavor", flavor, "Model flavor (binary, multiclass, external)");
  score_cmd->add_option("--run", run, "Run index for stochastic methods");
  auto* score_seed = score_cmd->add_option("--seed", seed, "Master seed (default: config seed)");

  auto* eval = app.add_subcommand("eval", "Full protocol: AUROC/DSC report");
  eval->add_option("--config", config, "Benchmark config (JSON)")->required();
  eval->add_option("--out", out, "Report path (.md or .csv)")->required();
  eval->add_option("--runs", runs, "Number of runs (default: config)");

  auto* gate_cmd = app.add_subcommand("gate", "Flag a score above a percentile of ID reference scores");
  gate_cmd->add_option("--score", score, "Image score")->required();
  gate_cmd->add_option("--refs", refs, "Reference scores CSV")->required();
  gate_cmd->add_option("--percentile", pct, "Percentile in (50, 100)");

  auto* demo = app.add_subcommand("demo", "Hermetic end-to-end run");
  demo->add_option("--out", out, "Output directory")->required();
  demo->add_option("--seed", seed, "Master seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*phantom) {
      const auto cfg = config_or_defaults(config);
      const auto [ref, test] = harness::generate_phantoms(cfg, out);
      std::cout << ref.path.string() << '\n' << test.path.string() << '\n';
    } else if (*synth) {
      const auto cfg = config_or_defaults(config);
      const auto id = DatasetManifest::load(manifest);
      const auto res = harness::synth_benchmark(id, cfg.artifacts, out, *synth_seed ? seed : cfg.seed);
      for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
      for (const auto& d : res.datasets) std::cout << d.path.string() << '\n';
    } else if (*sigs) {
      const auto cfg = config_or_defaults(config);
      const auto m = DatasetManifest::load(manifest);
      harness::build_references(m, pick_flavor(cfg, flavor)).save_csv(out);
    } else if (*score_cmd) {
      auto cfg = config_or_defaults(config);
      cfg.scoring.use_mask = cfg.scoring.use_mask || mask;
      const auto m = DatasetManifest::load(manifest);
      const auto kind = uq::parse_method(method);
      std::optional<uq::ReferenceSignatureSet> bank;
      if (kind == uq::Method::dum) {
        if (refs.empty()) throw Error(Errc::usage, "dum needs --refs SIGS.csv");
        bank = uq::ReferenceSignatureSet::load_csv(refs);
      }
      const harness::ScoringContext ctx{pick_flavor(cfg, flavor), cfg.scoring, *score_seed ? seed : cfg.seed,
                                        bank ? &*bank : nullptr};
      harness::write_scores_csv(harness::score_dataset(m, kind, ctx, run), out);
    } else if (*eval) {
      auto cfg = load_config(config);
      if (runs > 0) cfg.runs = runs;
      const fs::path report_path(out);
      const auto format = harness::report_format_for(report_path);
      const fs::path dir = report_path.has_parent_path() ? report_path.parent_path() : fs::path(".");
      const auto inputs = harness::prepare_inputs(cfg, dir / "data");
      const auto report = harness::run_eval(inputs, cfg, dir / "scores");
      write_file(report_path, harness::emit_report(report, format));
    } else if (*gate_cmd) {
      std::vector<double> values;
      for (const auto& s : harness::read_scores_csv(refs)) values.push_back(s.score);
      const auto g = harness::gate(score, values, pct);
      const bool flag = g.decision == harness::GateDecision::flag;
      std::printf("%s (score %.6g, threshold %.6g)\n", flag ? "flag" : "pass", score, g.threshold);
      return flag ? 2 : 0;
    } else if (*demo) {
      const auto res = harness::run_demo(out, seed);
      std::cout << res.markdown.string() << '\n' << res.csv.string() << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "oodbench: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "oodbench: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
