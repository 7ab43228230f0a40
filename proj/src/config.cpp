#include "oodbench/config.hpp"

#include <fstream>
#include <initializer_list>
#include <string_view>

#include "oodbench/error.hpp"

namespace oodbench {

namespace fs = std::filesystem;

namespace {

void allow_keys(const Json& j, std::initializer_list<std::string_view> keys, std::string_view where) {
  if (!j.is_object()) throw Error(Errc::config, std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (auto k : keys) known = known || k == key;
    if (!known) throw Error(Errc::config, "unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Json shape_json(const Shape& s) { return Json::array({s.nx, s.ny, s.nz}); }

Shape shape_from(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::config, "shape must be [nx, ny, nz]");
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>(), j[2].get<std::size_t>()};
}

}  // namespace

Json to_json(const artifacts::Spec& spec) {
  using namespace artifacts;
  Json j;
  j["kind"] = std::string(to_string(spec.kind()));
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, DownsampleParams>) {
          j["factor"] = p.factor;
          j["axis"] = std::string(to_string(p.axis));
        } else if constexpr (std::is_same_v<P, BiasParams>) {
          j["order"] = p.order;
          j["coeff_magnitude"] = p.coeff_magnitude;
        } else if constexpr (std::is_same_v<P, MotionParams>) {
          j["num_transforms"] = p.num_transforms;
          j["max_rotation_deg"] = p.max_rotation_deg;
          j["max_translation_mm"] = p.max_translation_mm;
        } else if constexpr (std::is_same_v<P, SpikesParams>) {
          j["num_spikes"] = p.num_spikes;
          j["intensity"] = p.intensity;
        } else if constexpr (std::is_same_v<P, NoiseParams>) {
          j["std"] = p.std;
        } else if constexpr (std::is_same_v<P, GhostParams>) {
          j["num_ghosts"] = p.num_ghosts;
          j["axis"] = std::string(to_string(p.axis));
          j["intensity"] = p.intensity;
        } else if constexpr (std::is_same_v<P, TruncationParams>) {
          j["max_fraction"] = p.max_fraction;
        } else {
          j["factor"] = p.factor;
        }
      },
      spec.params);
  j["seed"] = spec.seed;
  return j;
}

artifacts::Spec artifact_from_json(const Json& j) {
  using namespace artifacts;
  try {
    const Kind kind = parse_kind(j.at("kind").get<std::string>());
    Spec spec = default_spec(kind);
    read(j, "seed", spec.seed);
    std::visit(
        [&](auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, DownsampleParams>) {
            allow_keys(j, {"kind", "seed", "factor", "axis"}, "downsample artifact");
            read(j, "factor", p.factor);
            if (j.contains("axis")) p.axis = parse_axis(j.at("axis").get<std::string>());
          } else if constexpr (std::is_same_v<P, BiasParams>) {
            allow_keys(j, {"kind", "seed", "order", "coeff_magnitude"}, "bias artifact");
            read(j, "order", p.order);
            read(j, "coeff_magnitude", p.coeff_magnitude);
          } else if constexpr (std::is_same_v<P, MotionParams>) {
            allow_keys(j, {"kind", "seed", "num_transforms", "max_rotation_deg", "max_translation_mm"},
                       "motion artifact");
            read(j, "num_transforms", p.num_transforms);
            read(j, "max_rotation_deg", p.max_rotation_deg);
            read(j, "max_translation_mm", p.max_translation_mm);
          } else if constexpr (std::is_same_v<P, SpikesParams>) {
            allow_keys(j, {"kind", "seed", "num_spikes", "intensity"}, "spikes artifact");
            read(j, "num_spikes", p.num_spikes);
            read(j, "intensity", p.intensity);
          } else if constexpr (std::is_same_v<P, NoiseParams>) {
            allow_keys(j, {"kind", "seed", "std"}, "noise artifact");
            read(j, "std", p.std);
          } else if constexpr (std::is_same_v<P, GhostParams>) {
            allow_keys(j, {"kind", "seed", "num_ghosts", "axis", "intensity"}, "ghost artifact");
            read(j, "num_ghosts", p.num_ghosts);
            read(j, "intensity", p.intensity);
            if (j.contains("axis")) p.axis = parse_axis(j.at("axis").get<std::string>());
          } else if constexpr (std::is_same_v<P, TruncationParams>) {
            allow_keys(j, {"kind", "seed", "max_fraction"}, "truncation artifact");
            read(j, "max_fraction", p.max_fraction);
          } else {
            allow_keys(j, {"kind", "seed", "factor"}, "scale artifact");
            read(j, "factor", p.factor);
          }
        },
        spec.params);
    check(spec);
    return spec;
  } catch (const Json::exception& e) {
    throw Error(Errc::config, std::string("artifact spec: ") + e.what());
  }
}

Json to_json(const toy::PhantomSpec& s) {
  Json j;
  j["shape"] = shape_json(s.shape);
  j["spacing"] = Json::array({s.spacing.sx, s.spacing.sy, s.spacing.sz});
  j["means"] = s.means;
  j["stds"] = s.stds;
  j["lesion_count"] = Json::array({s.lesion_count_min, s.lesion_count_max});
  j["lesion_radius"] = Json::array({s.lesion_radius_min, s.lesion_radius_max});
  j["head_fraction"] = s.head_fraction;
  j["shape_jitter"] = s.shape_jitter;
  j["intensity_jitter"] = s.intensity_jitter;
  return j;
}

toy::PhantomSpec phantom_from_json(const Json& j, toy::PhantomSpec s) {
  allow_keys(j,
             {"shape", "spacing", "means", "stds", "lesion_count", "lesion_radius", "head_fraction", "shape_jitter",
              "intensity_jitter"},
             "phantom");
  try {
    if (j.contains("shape")) s.shape = shape_from(j.at("shape"));
    if (j.contains("spacing")) {
      const auto sp = j.at("spacing").get<std::array<double, 3>>();
      s.spacing = {sp[0], sp[1], sp[2]};
    }
    read(j, "means", s.means);
    read(j, "stds", s.stds);
    if (j.contains("lesion_count")) {
      const auto r = j.at("lesion_count").get<std::array<int, 2>>();
      s.lesion_count_min = r[0];
      s.lesion_count_max = r[1];
    }
    if (j.contains("lesion_radius")) {
      const auto r = j.at("lesion_radius").get<std::array<double, 2>>();
      s.lesion_radius_min = r[0];
      s.lesion_radius_max = r[1];
    }
    read(j, "head_fraction", s.head_fraction);
    read(j, "shape_jitter", s.shape_jitter);
    read(j, "intensity_jitter", s.intensity_jitter);
  } catch (const Json::exception& e) {
    throw Error(Errc::config, std::string("phantom: ") + e.what());
  }
  toy::check(s);
  return s;
}

Json to_json(const toy::ToyModelConfig& c) {
  Json j;
  j["prototypes"] = c.prototypes;
  j["lesion_class"] = c.lesion_class;
  j["temperature"] = c.temperature;
  j["smoothing"] = c.smoothing;
  j["perturbation"] = c.perturbation;
  j["feature_sigma"] = c.feature_sigma;
  return j;
}

toy::ToyModelConfig model_from_json(const Json& j, toy::ToyModelConfig c) {
  allow_keys(j, {"prototypes", "lesion_class", "temperature", "smoothing", "perturbation", "feature_sigma"},
             "model");
  try {
    read(j, "prototypes", c.prototypes);
    read(j, "lesion_class", c.lesion_class);
    read(j, "temperature", c.temperature);
    read(j, "smoothing", c.smoothing);
    read(j, "perturbation", c.perturbation);
    read(j, "feature_sigma", c.feature_sigma);
  } catch (const Json::exception& e) {
    throw Error(Errc::config, std::string("model: ") + e.what());
  }
  toy::check(c);
  return c;
}

BenchmarkConfig BenchmarkConfig::defaults() {
  BenchmarkConfig cfg;
  for (auto kind : artifacts::kAllKinds) cfg.artifacts.push_back(artifacts::default_spec(kind));
  cfg.flavors = {{"binary", toy::ToyModelConfig::binary(), false},
                 {"multiclass", toy::ToyModelConfig::multiclass(), false}};
  return cfg;
}

Json to_json(const BenchmarkConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed;
  j["phantom"] = to_json(cfg.phantom);
  j["reference_cases"] = cfg.reference_cases;
  j["test_cases"] = cfg.test_cases;
  Json arts = Json::array();
  for (const auto& a : cfg.artifacts) {
    Json aj = to_json(a);
    aj.erase("seed");
    arts.push_back(std::move(aj));
  }
  j["artifacts"] = std::move(arts);
  Json models = Json::object();
  for (const auto& f : cfg.flavors) {
    if (f.external) {
      models[f.name] = Json{{"external", true}, {"lesion_class", f.model.lesion_class}};
    } else {
      models[f.name] = to_json(f.model);
    }
  }
  j["models"] = std::move(models);
  j["scoring"] = {{"mc_samples", cfg.scoring.mc_samples},
                  {"ensemble_members", cfg.scoring.ensemble_members},
                  {"dum_reducer", cfg.scoring.reducer.name()},
                  {"dum_k", cfg.scoring.reducer.k},
                  {"mask", cfg.scoring.use_mask}};
  Json methods = Json::array();
  for (auto m : cfg.methods) methods.push_back(std::string(uq::to_string(m)));
  j["eval"] = {{"runs", cfg.runs}, {"methods", methods}, {"self_control", cfg.self_control}};
  return j;
}

BenchmarkConfig config_from_json(const Json& j, const fs::path& base_dir) {
  allow_keys(j, {"seed", "phantom", "reference_cases", "test_cases", "artifacts", "models", "scoring", "eval", "datasets"},
             "config");
  BenchmarkConfig cfg = BenchmarkConfig::defaults();
  try {
    read(j, "seed", cfg.seed);
    if (j.contains("phantom")) cfg.phantom = phantom_from_json(j.at("phantom"), cfg.phantom);
    read(j, "reference_cases", cfg.reference_cases);
    read(j, "test_cases", cfg.test_cases);
    if (j.contains("artifacts")) {
      cfg.artifacts.clear();
      for (const auto& a : j.at("artifacts")) cfg.artifacts.push_back(artifact_from_json(a));
    }
    if (j.contains("models")) {
      cfg.flavors.clear();
      for (const auto& [name, mj] : j.at("models").items()) {
        FlavorConfig f;
        f.name = name;
        if (mj.value("external", false)) {
          allow_keys(mj, {"external", "lesion_class"}, "external model '" + name + "'");
          f.external = true;
          f.model.lesion_class = mj.value("lesion_class", 1);
          f.model.prototypes.clear();
        } else {
          const auto base = name == "multiclass" ? toy::ToyModelConfig::multiclass() : toy::ToyModelConfig::binary();
          f.model = model_from_json(mj, base);
        }
        cfg.flavors.push_back(std::move(f));
      }
    }
    if (j.contains("scoring")) {
      const auto& s = j.at("scoring");
      allow_keys(s, {"mc_samples", "ensemble_members", "dum_reducer", "dum_k", "mask"}, "scoring");
      read(s, "mc_samples", cfg.scoring.mc_samples);
      read(s, "ensemble_members", cfg.scoring.ensemble_members);
      const std::size_t k = s.value("dum_k", cfg.scoring.reducer.k);
      cfg.scoring.reducer = uq::Reducer::parse(s.value("dum_reducer", cfg.scoring.reducer.name()), k);
      read(s, "mask", cfg.scoring.use_mask);
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      allow_keys(e, {"runs", "methods", "self_control"}, "eval");
      read(e, "runs", cfg.runs);
      read(e, "self_control", cfg.self_control);
      if (e.contains("methods")) {
        cfg.methods.clear();
        for (const auto& m : e.at("methods")) cfg.methods.push_back(uq::parse_method(m.get<std::string>()));
      }
    }
    if (j.contains("datasets")) {
      const auto& d = j.at("datasets");
      allow_keys(d, {"reference", "test", "ood"}, "datasets");
      auto resolve = [&](const std::string& p) {
        fs::path path(p);
        return path.is_absolute() ? path : (base_dir / path).lexically_normal();
      };
      if (d.contains("reference")) cfg.reference_manifest = resolve(d.at("reference").get<std::string>());
      if (d.contains("test")) cfg.test_manifest = resolve(d.at("test").get<std::string>());
      if (d.contains("ood")) {
        for (const auto& p : d.at("ood")) cfg.ood_manifests.push_back(resolve(p.get<std::string>()));
      }
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::config, e.what());
  }
  if (cfg.runs < 1) throw Error(Errc::config, "eval.runs must be >= 1");
  if (cfg.scoring.mc_samples < 2 || cfg.scoring.ensemble_members < 2) {
    throw Error(Errc::config, "mc_samples and ensemble_members must be >= 2");
  }
  if (cfg.flavors.empty()) throw Error(Errc::config, "at least one model flavor is required");
  return cfg;
}

BenchmarkConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open config " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw Error(Errc::format, path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

}  // namespace oodbench
