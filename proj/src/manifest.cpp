#include "oodbench/manifest.hpp"

#include <fstream>
#include <set>

#include "oodbench/config.hpp"
#include "oodbench/error.hpp"

namespace oodbench {

namespace fs = std::filesystem;

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::id_reference: return "id_reference";
    case Role::id_test: return "id_test";
    case Role::ood: return "ood";
  }
  return "?";
}

Role parse_role(std::string_view name) {
  if (name == "id_reference") return Role::id_reference;
  if (name == "id_test") return Role::id_test;
  if (name == "ood") return Role::ood;
  throw Error(Errc::config, "unknown dataset role '" + std::string(name) + "'");
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::string relative_to(const fs::path& p, const fs::path& dir) {
  if (p.is_absolute() != dir.is_absolute()) return p.string();
  return p.lexically_proximate(dir).generic_string();
}

void require_exists(const fs::path& p, const std::string& case_id) {
  if (!fs::exists(p)) throw Error(Errc::config, "case '" + case_id + "': missing file " + p.string());
}

PredictionPaths read_prediction(const Json& j, const fs::path& base) {
  PredictionPaths out;
  if (j.is_string()) {
    out.push_back(resolve(base, j.get<std::string>()));
  } else if (j.is_array()) {
    for (const auto& e : j) out.push_back(resolve(base, e.get<std::string>()));
  } else {
    throw Error(Errc::config, "prediction entry must be a path or a list of per-class paths");
  }
  return out;
}

Json write_prediction(const PredictionPaths& p, const fs::path& dir) {
  if (p.size() == 1) return relative_to(p.front(), dir);
  Json arr = Json::array();
  for (const auto& e : p) arr.push_back(relative_to(e, dir));
  return arr;
}

}  // namespace

DatasetManifest DatasetManifest::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open manifest " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw Error(Errc::format, path.string() + ": " + e.what());
  }
  const fs::path base = path.parent_path();
  DatasetManifest m;
  try {
    m.dataset_id = j.at("dataset").get<std::string>();
    m.role = parse_role(j.at("role").get<std::string>());
    m.provenance = j.value("provenance", "");
    m.truth_classes = j.value("truth_classes", toy::kPhantomClasses);
    m.lesion_class = j.value("lesion_class", toy::kPhantomLesion);
    if (j.contains("artifact")) m.artifact = artifact_from_json(j.at("artifact"));
    for (const auto& c : j.at("cases")) {
      CaseEntry e;
      e.id = c.at("id").get<std::string>();
      e.image = resolve(base, c.at("image").get<std::string>());
      if (c.contains("truth")) e.truth = resolve(base, c.at("truth").get<std::string>());
      if (c.contains("prediction")) e.prediction = read_prediction(c.at("prediction"), base);
      if (c.contains("mc_stack")) {
        for (const auto& p : c.at("mc_stack")) e.mc_stack.push_back(read_prediction(p, base));
      }
      if (c.contains("ensemble_stack")) {
        for (const auto& p : c.at("ensemble_stack")) e.ensemble_stack.push_back(read_prediction(p, base));
      }
      if (c.contains("features")) e.features = resolve(base, c.at("features").get<std::string>());
      if (c.contains("artifact_seed")) e.artifact_seed = c.at("artifact_seed").get<std::uint64_t>();
      m.cases.push_back(std::move(e));
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::config, path.string() + ": " + e.what());
  }
  if (m.lesion_class < 0 || m.lesion_class >= m.truth_classes) {
    throw Error(Errc::config, path.string() + ": lesion_class outside truth_classes");
  }

  for (const auto& c : m.cases) {
    require_exists(c.image, c.id);
    if (c.truth) require_exists(*c.truth, c.id);
    for (const auto& p : c.prediction) require_exists(p, c.id);
    for (const auto& s : c.mc_stack)
      for (const auto& p : s) require_exists(p, c.id);
    for (const auto& s : c.ensemble_stack)
      for (const auto& p : s) require_exists(p, c.id);
    if (c.features) require_exists(*c.features, c.id);
  }
  return m;
}

void DatasetManifest::save(const fs::path& path) const {
  const fs::path dir = path.parent_path();
  Json j;
  j["dataset"] = dataset_id;
  j["role"] = std::string(to_string(role));
  j["provenance"] = provenance;
  j["truth_classes"] = truth_classes;
  j["lesion_class"] = lesion_class;
  if (artifact) j["artifact"] = to_json(*artifact);
  Json cases_json = Json::array();
  for (const auto& c : cases) {
    Json e;
    e["id"] = c.id;
    e["image"] = relative_to(c.image, dir);
    if (c.truth) e["truth"] = relative_to(*c.truth, dir);
    if (!c.prediction.empty()) e["prediction"] = write_prediction(c.prediction, dir);
    if (!c.mc_stack.empty()) {
      Json arr = Json::array();
      for (const auto& p : c.mc_stack) arr.push_back(write_prediction(p, dir));
      e["mc_stack"] = arr;
    }
    if (!c.ensemble_stack.empty()) {
      Json arr = Json::array();
      for (const auto& p : c.ensemble_stack) arr.push_back(write_prediction(p, dir));
      e["ensemble_stack"] = arr;
    }
    if (c.features) e["features"] = relative_to(*c.features, dir);
    if (c.artifact_seed) e["artifact_seed"] = *c.artifact_seed;
    cases_json.push_back(std::move(e));
  }
  j["cases"] = std::move(cases_json);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

void check_disjoint(const DatasetManifest& reference, const DatasetManifest& test) {
  std::set<fs::path> seen;
  for (const auto& c : reference.cases) seen.insert(fs::weakly_canonical(c.image));
  for (const auto& c : test.cases) {
    if (seen.contains(fs::weakly_canonical(c.image))) {
      throw Error(Errc::config, "case '" + c.id + "' appears in both the reference and the test set");
    }
  }
}

}  // namespace oodbench
