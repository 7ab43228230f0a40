#include "oodbench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "oodbench/error.hpp"
#include "oodbench/nifti.hpp"
#include "oodbench/random.hpp"
#include "oodbench/toy_model.hpp"

namespace oodbench::harness {

namespace fs = std::filesystem;

std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("OODBENCH_THREADS"); env && *env) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (*end != '\0' || cap < 1) throw Error(Errc::config, "OODBENCH_THREADS must be a positive integer");
    n = std::min(n, static_cast<std::size_t>(cap));
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = worker_count(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  auto work = [&] {
    for (std::size_t i = next++; i < n && !failed; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed streams.
constexpr std::uint64_t kReferenceStream = 1;
constexpr std::uint64_t kTestStream = 2;
constexpr std::uint64_t kMcStream = 3;
constexpr std::uint64_t kEnsembleStream = 4;

std::string case_name(std::string_view prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return std::string(prefix) + buf;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, "cannot create " + dir.string() + ": " + ec.message());
}

DatasetFile phantom_set(const BenchmarkConfig& cfg, const fs::path& dir, std::string name, Role role,
                        std::uint64_t stream, std::size_t count, std::string_view prefix) {
  make_dir(dir);
  DatasetManifest m;
  m.dataset_id = std::move(name);
  m.role = role;
  m.provenance = "toy phantoms, master seed " + std::to_string(cfg.seed);
  m.truth_classes = toy::kPhantomClasses;
  m.lesion_class = toy::kPhantomLesion;
  m.cases.resize(count);
  parallel_for(count, [&](std::size_t i) {
    toy::PhantomSpec spec = cfg.phantom;
    spec.seed = mix_seed(cfg.seed, {stream, i});
    const toy::Phantom ph = toy::make_phantom(spec);
    CaseEntry& c = m.cases[i];
    c.id = case_name(prefix, i);
    c.image = dir / (c.id + ".nii.gz");
    c.truth = dir / (c.id + "_truth.nii.gz");
    nifti::write_scalar(ph.image, c.image, true);
    nifti::write_labels(ph.labels, *c.truth, true);
  });
  DatasetFile out{std::move(m), dir / "manifest.json"};
  out.manifest.save(out.path);
  return out;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t master, std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = splitmix64(master);
  for (auto p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

std::pair<DatasetFile, DatasetFile> generate_phantoms(const BenchmarkConfig& cfg, const fs::path& out_dir) {
  toy::check(cfg.phantom);
  auto ref = phantom_set(cfg, out_dir / "reference", "reference", Role::id_reference, kReferenceStream,
                         cfg.reference_cases, "ref_");
  auto test = phantom_set(cfg, out_dir / "test", "test", Role::id_test, kTestStream, cfg.test_cases, "test_");
  return {std::move(ref), std::move(test)};
}

SynthResult synth_benchmark(const DatasetManifest& id_test, std::span<const artifacts::Spec> specs,
                            const fs::path& out_dir, std::uint64_t master_seed) {
  if (id_test.role != Role::id_test) {
    throw Error(Errc::config, "synth needs an id_test manifest, got role " + std::string(to_string(id_test.role)));
  }
  std::set<artifacts::Kind> kinds;
  for (const auto& s : specs) {
    artifacts::check(s);
    if (!kinds.insert(s.kind()).second) {
      throw Error(Errc::config, "artifact kind '" + std::string(artifacts::to_string(s.kind())) + "' listed twice");
    }
  }
  SynthResult result;
  if (id_test.cases.empty()) {
    result.warnings.push_back("ID manifest '" + id_test.dataset_id + "' has no cases; artifact datasets are empty");
  }
  for (const auto& spec : specs) {
    const std::string kind(artifacts::to_string(spec.kind()));
    const fs::path dir = out_dir / kind;
    make_dir(dir);
    DatasetManifest m;
    m.dataset_id = kind;
    m.role = Role::ood;
    m.provenance = kind + " corruption of '" + id_test.dataset_id + "', per-image seed = master seed xor case index";
    m.truth_classes = id_test.truth_classes;
    m.lesion_class = id_test.lesion_class;
    m.artifact = spec;
    m.artifact->seed = master_seed;
    m.cases.resize(id_test.cases.size());
    parallel_for(id_test.cases.size(), [&](std::size_t i) {
      const CaseEntry& src = id_test.cases[i];
      artifacts::Spec s = spec;
      s.seed = derive_seed(master_seed, i);
      const ScalarVolume out = artifacts::apply(nifti::read_scalar(src.image), s);
      CaseEntry& c = m.cases[i];
      c.id = src.id;
      c.image = dir / (src.id + ".nii.gz");
      c.truth = src.truth;
      c.artifact_seed = s.seed;
      nifti::write_scalar(out, c.image, true);
    });
    DatasetFile f{std::move(m), dir / "manifest.json"};
    f.manifest.save(f.path);
    result.datasets.push_back(std::move(f));
  }
  return result;
}

DatasetFile copy_as_control(const DatasetManifest& source, const fs::path& out_dir, const std::string& dataset_id) {
  const fs::path dir = out_dir / dataset_id;
  make_dir(dir);
  DatasetManifest m = source;
  m.dataset_id = dataset_id;
  m.role = Role::ood;
  m.provenance = "byte-identical copy of '" + source.dataset_id + "'";
  m.artifact.reset();
  auto copy = [&](const fs::path& from) {
    const fs::path to = dir / from.filename();
    std::error_code ec;
    fs::copy_file(from, to, fs::copy_options::overwrite_existing, ec);
    if (ec) throw Error(Errc::io, "cannot copy " + from.string() + ": " + ec.message());
    return to;
  };
  for (auto& c : m.cases) {
    c.image = copy(c.image);
    if (c.truth) c.truth = copy(*c.truth);
  }
  DatasetFile f{std::move(m), dir / "manifest.json"};
  f.manifest.save(f.path);
  return f;
}

namespace {

ProbVolume read_prediction(const PredictionPaths& p) {
  if (p.size() == 1) return nifti::read_prob(p.front());
  return nifti::read_prob(std::span<const fs::path>(p));
}

[[noreturn]] void missing(const CaseEntry& c, std::string_view what, uq::Method method) {
  throw Error(Errc::config, "case '" + c.id + "': " + std::string(what) + " required by " +
                                std::string(uq::to_string(method)) + " is missing");
}

bool deterministic(uq::Method method, const FlavorConfig& flavor) {
  return flavor.external || method == uq::Method::msp || method == uq::Method::dum;
}

// All requested methods and runs for one case, sharing the decoded image,
// the smoothed image and the truth.
class CaseEvaluator {
 public:
  CaseEvaluator(const DatasetManifest& m, std::size_t index, const ScoringContext& ctx)
      : m_(m), c_(m.cases[index]), index_(index), ctx_(ctx) {
    if (c_.truth) {
      truth_ = nifti::read_labels(*c_.truth, m.truth_classes);
      std::vector<std::uint16_t> bin(truth_->size());
      for (std::size_t v = 0; v < bin.size(); ++v) bin[v] = (*truth_)[v] == m.lesion_class ? 1 : 0;
      lesion_truth_ = LabelVolume(truth_->grid(), std::move(bin), 2);
    }
    if (ctx.options.use_mask && !truth_) {
      throw Error(Errc::config, "case '" + c_.id + "': masked scoring needs a truth file");
    }
  }

  CaseScore score(uq::Method method, std::size_t run) {
    CaseScore out;
    out.case_id = c_.id;
    switch (method) {
      case uq::Method::msp: {
        const ProbVolume p = single_prediction();
        out.score = uq::image_score(uq::msp_uncertainty(p), mask());
        out.dice = lesion_dice(p);
        break;
      }
      case uq::Method::mc_variance:
      case uq::Method::ensemble_variance: {
        uq::VarianceAccumulator acc;
        accumulate(method, run, acc);
        out.score = uq::image_score(acc.finish(), mask());
        out.dice = lesion_dice(acc.mean());
        break;
      }
      case uq::Method::dum: {
        if (!ctx_.refs) throw Error(Errc::usage, "dum needs a reference signature set");
        const auto sig = uq::dum_signature(channels(), c_.id);
        out.score = uq::dum_score(sig, *ctx_.refs, ctx_.options.reducer);
        break;
      }
    }
    return out;
  }

 private:
  const toy::ToyModelConfig& model() const { return ctx_.flavor.model; }

  const ScalarVolume& image() {
    if (!image_) image_ = nifti::read_scalar(c_.image);
    return *image_;
  }

  const ScalarVolume& smoothed() {
    if (!smoothed_) smoothed_ = toy::gaussian_blur(image(), model().smoothing);
    return *smoothed_;
  }

  const LabelVolume* mask() const { return ctx_.options.use_mask ? &*truth_ : nullptr; }

  ProbVolume single_prediction() {
    if (ctx_.flavor.external) {
      if (c_.prediction.empty()) missing(c_, "prediction", uq::Method::msp);
      return read_prediction(c_.prediction);
    }
    return toy::classify(smoothed(), model().prototypes, model().temperature);
  }

  void accumulate(uq::Method method, std::size_t run, uq::VarianceAccumulator& acc) {
    const bool mc = method == uq::Method::mc_variance;
    if (ctx_.flavor.external) {
      const auto& stack = mc ? c_.mc_stack : c_.ensemble_stack;
      if (stack.size() < 2) missing(c_, mc ? "mc_stack (>= 2 members)" : "ensemble_stack (>= 2 members)", method);
      for (const auto& member : stack) acc.add(read_prediction(member));
      return;
    }
    const std::size_t members = mc ? ctx_.options.mc_samples : ctx_.options.ensemble_members;
    const ScalarVolume& img = smoothed();
    scratch_.resize(img.size() * static_cast<std::size_t>(model().num_classes()));
    for (std::size_t t = 0; t < members; ++t) {
      // MC passes are drawn per case; ensemble members are fixed models shared by all cases.
      const std::uint64_t seed = mc ? mix_seed(ctx_.seed, {kMcStream, run, index_, t})
                                    : mix_seed(ctx_.seed, {kEnsembleStream, run, t});
      toy::classify_into(img, toy::jittered_prototypes(model(), seed), model().temperature, scratch_);
      acc.add(img.grid(), model().num_classes(), scratch_);
    }
  }

  std::vector<ScalarVolume> channels() {
    if (ctx_.flavor.external) {
      if (!c_.features) missing(c_, "features", uq::Method::dum);
      return nifti::read_channels(*c_.features);
    }
    return toy::features(image(), model());
  }

  std::optional<double> lesion_dice(const ProbVolume& p) const {
    if (!lesion_truth_) return std::nullopt;
    const LabelVolume pred = argmax_labels(p);
    std::vector<std::uint16_t> bin(pred.size());
    for (std::size_t v = 0; v < bin.size(); ++v) bin[v] = pred[v] == model().lesion_class ? 1 : 0;
    return metrics::dice(LabelVolume(pred.grid(), std::move(bin), 2), *lesion_truth_, 1);
  }

  const DatasetManifest& m_;
  const CaseEntry& c_;
  std::size_t index_;
  const ScoringContext& ctx_;
  std::optional<ScalarVolume> image_;
  std::optional<ScalarVolume> smoothed_;
  std::optional<LabelVolume> truth_;
  std::optional<LabelVolume> lesion_truth_;
  std::vector<double> scratch_;
};

// scores[method][run][case]
using DatasetScores = std::vector<std::vector<std::vector<CaseScore>>>;

DatasetScores score_all(const DatasetManifest& m, std::span<const uq::Method> methods, const ScoringContext& ctx,
                        std::size_t runs) {
  DatasetScores out(methods.size(), std::vector<std::vector<CaseScore>>(runs, std::vector<CaseScore>(m.cases.size())));
  parallel_for(m.cases.size(), [&](std::size_t i) {
    CaseEvaluator eval(m, i, ctx);
    for (std::size_t k = 0; k < methods.size(); ++k) {
      const bool once = deterministic(methods[k], ctx.flavor);
      for (std::size_t r = 0; r < runs; ++r) {
        out[k][r][i] = once && r > 0 ? out[k][0][i] : eval.score(methods[k], r);
      }
    }
  });
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

uq::ReferenceSignatureSet build_references(const DatasetManifest& reference, const FlavorConfig& flavor) {
  std::vector<std::optional<Signature>> sigs(reference.cases.size());
  parallel_for(reference.cases.size(), [&](std::size_t i) {
    const CaseEntry& c = reference.cases[i];
    std::vector<ScalarVolume> ch;
    if (flavor.external) {
      if (!c.features) missing(c, "features", uq::Method::dum);
      ch = nifti::read_channels(*c.features);
    } else {
      ch = toy::features(nifti::read_scalar(c.image), flavor.model);
    }
    sigs[i] = uq::dum_signature(ch, c.id);
  });
  std::vector<Signature> out;
  out.reserve(sigs.size());
  for (auto& s : sigs) out.push_back(std::move(*s));
  return uq::ReferenceSignatureSet(std::move(out), reference.dataset_id);
}

std::vector<CaseScore> score_dataset(const DatasetManifest& m, uq::Method method, const ScoringContext& ctx,
                                     std::size_t run) {
  std::vector<CaseScore> out(m.cases.size());
  parallel_for(m.cases.size(), [&](std::size_t i) { out[i] = CaseEvaluator(m, i, ctx).score(method, run); });
  return out;
}

void write_scores_csv(std::span<const CaseScore> scores, const fs::path& path) {
  if (path.has_parent_path()) make_dir(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << "case_id,score,dice\n";
  for (const auto& s : scores) {
    out << s.case_id << ',' << fmt("%.17g", s.score) << ',';
    if (s.dice) out << fmt("%.17g", *s.dice);
    out << '\n';
  }
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

std::vector<CaseScore> read_scores_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::format, path.string() + ": missing header");
  std::vector<CaseScore> out;
  auto number = [&](const std::string& cell) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || *end != '\0') throw Error(Errc::format, path.string() + ": bad number '" + cell + "'");
    return v;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() < 2) throw Error(Errc::format, path.string() + ": expected case_id,score[,dice]");
    CaseScore s;
    s.case_id = cells[0];
    s.score = number(cells[1]);
    if (cells.size() > 2 && !cells[2].empty()) s.dice = number(cells[2]);
    out.push_back(std::move(s));
  }
  return out;
}

const ReportCell* EvalReport::find(std::string_view dataset, uq::Method method, std::string_view flavor) const {
  for (const auto& c : cells) {
    if (c.dataset == dataset && c.method == method && c.flavor == flavor) return &c;
  }
  return nullptr;
}

EvalReport run_eval(const EvalInputs& inputs, const BenchmarkConfig& cfg, const fs::path& scores_dir) {
  if (inputs.test.cases.empty()) throw Error(Errc::insufficient_data, "the ID test set has no cases");
  if (cfg.runs < 1) throw Error(Errc::config, "runs must be >= 1");
  check_disjoint(inputs.reference, inputs.test);

  std::vector<const DatasetManifest*> sets{&inputs.test};
  for (const auto& m : inputs.ood) sets.push_back(&m);
  std::set<std::string> names;
  for (const auto* m : sets) {
    if (!names.insert(m->dataset_id).second) throw Error(Errc::config, "duplicate dataset id '" + m->dataset_id + "'");
  }

  EvalReport report;
  report.test_dataset = inputs.test.dataset_id;
  for (const auto* m : sets) report.datasets.push_back(m->dataset_id);
  report.methods = cfg.methods;
  for (const auto& f : cfg.flavors) report.flavors.push_back(f.name);
  report.runs = cfg.runs;

  const bool needs_refs = std::find(cfg.methods.begin(), cfg.methods.end(), uq::Method::dum) != cfg.methods.end();

  // per flavor: scores per dataset
  std::vector<std::vector<DatasetScores>> all(cfg.flavors.size());
  for (std::size_t f = 0; f < cfg.flavors.size(); ++f) {
    const FlavorConfig& flavor = cfg.flavors[f];
    std::optional<uq::ReferenceSignatureSet> refs;
    if (needs_refs) {
      if (inputs.reference.cases.empty()) throw Error(Errc::config, "dum needs a non-empty id_reference dataset");
      refs = build_references(inputs.reference, flavor);
      make_dir(scores_dir / flavor.name);
      refs->save_csv(scores_dir / flavor.name / "signatures.csv");
    }
    const ScoringContext ctx{flavor, cfg.scoring, cfg.seed, refs ? &*refs : nullptr};
    for (const auto* m : sets) {
      all[f].push_back(score_all(*m, cfg.methods, ctx, cfg.runs));
      const DatasetScores& ds = all[f].back();
      for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
        for (std::size_t r = 0; r < cfg.runs; ++r) {
          write_scores_csv(ds[k][r], scores_dir / flavor.name / std::string(uq::to_string(cfg.methods[k])) /
                                         ("run" + std::to_string(r)) / (m->dataset_id + ".csv"));
        }
      }
    }
  }

  for (std::size_t d = 0; d < sets.size(); ++d) {
    for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
      for (std::size_t f = 0; f < cfg.flavors.size(); ++f) {
        ReportCell cell;
        cell.dataset = sets[d]->dataset_id;
        cell.method = cfg.methods[k];
        cell.flavor = cfg.flavors[f].name;
        std::vector<double> aurocs, dscs;
        for (std::size_t r = 0; r < cfg.runs; ++r) {
          const auto& cases = all[f][d][k][r];
          if (d > 0 && !cases.empty()) {
            std::vector<double> neg, pos;
            for (const auto& s : all[f][0][k][r]) neg.push_back(s.score);
            for (const auto& s : cases) pos.push_back(s.score);
            aurocs.push_back(metrics::auroc(neg, pos));
          }
          std::vector<double> dice;
          for (const auto& s : cases) {
            if (s.dice) dice.push_back(*s.dice);
          }
          if (!dice.empty()) dscs.push_back(metrics::mean_std(dice).mean);
        }
        if (aurocs.size() == cfg.runs) cell.auroc = metrics::mean_std(aurocs);
        if (dscs.size() == cfg.runs) cell.dsc = metrics::mean_std(dscs);
        report.cells.push_back(std::move(cell));
      }
    }
  }
  return report;
}

EvalInputs prepare_inputs(const BenchmarkConfig& cfg, const fs::path& data_dir) {
  EvalInputs in;
  if (cfg.test_manifest) {
    in.test = DatasetManifest::load(*cfg.test_manifest);
    if (in.test.role != Role::id_test) throw Error(Errc::config, "test manifest must have role id_test");
    if (cfg.reference_manifest) {
      in.reference = DatasetManifest::load(*cfg.reference_manifest);
      if (in.reference.role != Role::id_reference) {
        throw Error(Errc::config, "reference manifest must have role id_reference");
      }
    } else {
      in.reference.role = Role::id_reference;
    }
    for (const auto& p : cfg.ood_manifests) {
      in.ood.push_back(DatasetManifest::load(p));
      if (in.ood.back().role != Role::ood) throw Error(Errc::config, p.string() + ": role must be ood");
    }
  } else {
    auto [ref, test] = generate_phantoms(cfg, data_dir);
    in.reference = std::move(ref.manifest);
    in.test = std::move(test.manifest);
    auto synth = synth_benchmark(in.test, cfg.artifacts, data_dir, cfg.seed);
    for (auto& d : synth.datasets) in.ood.push_back(std::move(d.manifest));
  }
  if (cfg.self_control) in.ood.push_back(copy_as_control(in.test, data_dir).manifest);
  return in;
}

ReportFormat report_format_for(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return ReportFormat::csv;
  if (ext == ".md" || ext == ".markdown") return ReportFormat::markdown;
  throw Error(Errc::usage, "report path must end in .csv or .md: " + path.string());
}

namespace {

std::string method_label(uq::Method m) {
  switch (m) {
    case uq::Method::msp: return "MSP";
    case uq::Method::mc_variance: return "MC";
    case uq::Method::ensemble_variance: return "DE";
    case uq::Method::dum: return "DUM";
  }
  return "?";
}

bool has_dsc(uq::Method m) { return m != uq::Method::dum; }

std::string pm(const std::optional<metrics::MeanStd>& v, std::size_t runs) {
  if (!v) return "-";
  std::string s = fmt("%.2f", v->mean);
  if (runs > 1) s += " ± " + fmt("%.2f", v->std);
  return s;
}

}  // namespace

std::string emit_report(const EvalReport& r, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::csv) {
    out << "dataset";
    for (auto m : r.methods) {
      for (const auto& f : r.flavors) {
        const std::string p = std::string(uq::to_string(m)) + "_" + f;
        out << ',' << p << "_auroc_mean," << p << "_auroc_std";
        if (has_dsc(m)) out << ',' << p << "_dsc_mean," << p << "_dsc_std";
      }
    }
    out << '\n';
    auto put = [&](const std::optional<metrics::MeanStd>& v) {
      out << ',';
      if (v) out << fmt("%.4f", v->mean);
      out << ',';
      if (v) out << fmt("%.4f", v->std);
    };
    for (const auto& d : r.datasets) {
      out << d;
      for (auto m : r.methods) {
        for (const auto& f : r.flavors) {
          const ReportCell* c = r.find(d, m, f);
          put(c ? c->auroc : std::nullopt);
          if (has_dsc(m)) put(c ? c->dsc : std::nullopt);
        }
      }
      out << '\n';
    }
    return out.str();
  }

  out << "| Dataset |";
  std::size_t columns = 0;
  for (auto m : r.methods) {
    for (const auto& f : r.flavors) {
      out << ' ' << method_label(m) << ' ' << f << " AUROC |";
      ++columns;
      if (has_dsc(m)) {
        out << ' ' << method_label(m) << ' ' << f << " DSC |";
        ++columns;
      }
    }
  }
  out << "\n|---|";
  for (std::size_t i = 0; i < columns; ++i) out << "---:|";
  out << '\n';
  for (const auto& d : r.datasets) {
    // Best AUROC as displayed (two decimals); ties are all bolded.
    long best = -1;
    for (const auto& c : r.cells) {
      if (c.dataset == d && c.auroc) best = std::max(best, std::lround(c.auroc->mean * 100.0));
    }
    out << "| " << d << " |";
    for (auto m : r.methods) {
      for (const auto& f : r.flavors) {
        const ReportCell* c = r.find(d, m, f);
        const auto auroc = c ? c->auroc : std::nullopt;
        std::string cell = pm(auroc, r.runs);
        if (auroc && std::lround(auroc->mean * 100.0) == best) cell = "**" + cell + "**";
        out << ' ' << cell << " |";
        if (has_dsc(m)) out << ' ' << pm(c ? c->dsc : std::nullopt, r.runs) << " |";
      }
    }
    out << '\n';
  }
  return out.str();
}

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw Error(Errc::insufficient_data, "percentile of an empty list");
  if (!(p >= 0.0 && p <= 100.0)) throw Error(Errc::parameter, "percentile must be in [0, 100]");
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  const double h = static_cast<double>(s.size() - 1) * p / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= s.size()) return s.back();
  return s[lo] + (h - static_cast<double>(lo)) * (s[lo + 1] - s[lo]);
}

GateResult gate(double score, std::span<const double> reference_scores, double pct) {
  if (reference_scores.empty()) throw Error(Errc::insufficient_data, "gate needs reference scores");
  if (!(pct > 50.0 && pct < 100.0)) throw Error(Errc::parameter, "gate percentile must be in (50, 100)");
  GateResult g;
  g.threshold = percentile(reference_scores, pct);
  g.decision = score > g.threshold ? GateDecision::flag : GateDecision::pass;
  return g;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

}  // namespace

DemoResult run_demo(const fs::path& out_dir, std::uint64_t seed) {
  BenchmarkConfig cfg = BenchmarkConfig::defaults();
  cfg.seed = seed;
  make_dir(out_dir);
  write_text(out_dir / "config.json", to_json(cfg).dump(2) + "\n");
  const EvalInputs inputs = prepare_inputs(cfg, out_dir / "data");
  DemoResult res;
  res.report = run_eval(inputs, cfg, out_dir / "scores");
  res.markdown = out_dir / "report.md";
  res.csv = out_dir / "report.csv";
  write_text(res.markdown, emit_report(res.report, ReportFormat::markdown));
  write_text(res.csv, emit_report(res.report, ReportFormat::csv));
  return res;
}

}  // namespace oodbench::harness
