#include "lidarlift/config.hpp"

#include <set>

#include "lidarlift/error.hpp"
#include "lidarlift/io.hpp"

namespace lidarlift {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::Config, where + ": expected a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw Error(ErrorKind::Config, where + ": unknown key '" + key + "'");
  }
}

template <typename T>
bool read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return false;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::Config, where + "." + key + ": wrong type");
  }
  return true;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.empty() || path.is_absolute() || base.empty()) return path;
  return (base / path).lexically_normal();
}

}  // namespace

std::string calib_key_for_camera(const std::string& camera) {
  const auto underscore = camera.rfind('_');
  const std::string digits = underscore == std::string::npos ? camera : camera.substr(underscore + 1);
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
    throw Error(ErrorKind::Config, "camera id '" + camera + "' must look like image_<n>");
  }
  return "P" + digits;
}

void PipelineConfig::validate() const {
  if (dataset_root.empty()) throw Error(ErrorKind::Config, "dataset_root is required");
  if (output_root.empty()) throw Error(ErrorKind::Config, "output_root is required");
  if (class_map.empty()) throw Error(ErrorKind::Config, "class_map is required");
  if (cameras.empty()) throw Error(ErrorKind::Config, "at least one camera is required");
  for (const auto& c : cameras) calib_key_for_camera(c);
  if (refine.k == 0 || refine.k % 2 == 0) {
    throw Error(ErrorKind::Config, "refinement.k must be odd and >= 1, got " +
                                       std::to_string(refine.k));
  }
  if (jobs == 0) throw Error(ErrorKind::Config, "jobs must be >= 1");
  threshold.validate();
  const auto& a = augmentation;
  if (!(a.translate_range_m >= 0.0)) {
    throw Error(ErrorKind::Config, "augmentation.translate_range_m must be >= 0");
  }
  if (!(a.squeeze.low > 0.0 && a.squeeze.low <= a.squeeze.high)) {
    throw Error(ErrorKind::Config, "augmentation squeeze range must satisfy 0 < low <= high");
  }
  if (!(a.sector.min_width > 0.0 && a.sector.min_width <= a.sector.max_width)) {
    throw Error(ErrorKind::Config, "augmentation sector widths must satisfy 0 < min <= max");
  }
}

PipelineConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j,
             {"dataset_root", "output_root", "class_map", "label_remap", "sequences", "cameras",
              "sampling", "refinement", "threshold", "augmentation", "seed", "jobs"},
             "config");
  PipelineConfig cfg;
  std::string s;
  if (read(j, "dataset_root", s, "config")) cfg.dataset_root = resolve(base_dir, s);
  if (read(j, "output_root", s, "config")) cfg.output_root = resolve(base_dir, s);
  if (read(j, "class_map", s, "config")) cfg.class_map = resolve(base_dir, s);
  if (read(j, "label_remap", s, "config")) cfg.label_remap = resolve(base_dir, s);
  read(j, "sequences", cfg.sequences, "config");
  read(j, "cameras", cfg.cameras, "config");
  if (read(j, "sampling", s, "config")) {
    if (s == "nearest") {
      cfg.sampling = Sampling::Nearest;
    } else if (s == "bilinear") {
      cfg.sampling = Sampling::Bilinear;
    } else {
      throw Error(ErrorKind::Config, "sampling must be 'nearest' or 'bilinear'");
    }
  }
  if (j.contains("refinement")) {
    const auto& r = j["refinement"];
    check_keys(r, {"scheme", "k", "include_self", "tie_break"}, "refinement");
    if (read(r, "scheme", s, "refinement")) cfg.scheme = parse_refine_scheme(s);
    read(r, "k", cfg.refine.k, "refinement");
    read(r, "include_self", cfg.refine.include_self, "refinement");
    if (read(r, "tie_break", s, "refinement")) {
      if (s == "lowest_class") {
        cfg.refine.tie_break = TieBreak::LowestClass;
      } else if (s == "keep_original") {
        cfg.refine.tie_break = TieBreak::KeepOriginal;
      } else {
        throw Error(ErrorKind::Config, "refinement.tie_break must be lowest_class or keep_original");
      }
    }
  }
  if (j.contains("threshold")) {
    const auto& t = j["threshold"];
    check_keys(t, {"mode", "tau_min", "tau_max"}, "threshold");
    if (read(t, "mode", s, "threshold")) cfg.threshold.mode = parse_threshold_mode(s);
    read(t, "tau_min", cfg.threshold.tau_min, "threshold");
    read(t, "tau_max", cfg.threshold.tau_max, "threshold");
  }
  if (j.contains("augmentation")) {
    const auto& a = j["augmentation"];
    check_keys(a,
               {"translate_range_m", "squeeze_low", "squeeze_high", "sector_min_width",
                "sector_max_width"},
               "augmentation");
    read(a, "translate_range_m", cfg.augmentation.translate_range_m, "augmentation");
    read(a, "squeeze_low", cfg.augmentation.squeeze.low, "augmentation");
    read(a, "squeeze_high", cfg.augmentation.squeeze.high, "augmentation");
    read(a, "sector_min_width", cfg.augmentation.sector.min_width, "augmentation");
    read(a, "sector_max_width", cfg.augmentation.sector.max_width, "augmentation");
  }
  read(j, "seed", cfg.seed, "config");
  read(j, "jobs", cfg.jobs, "config");
  cfg.validate();
  return cfg;
}

json to_json(const PipelineConfig& cfg) {
  json j;
  j["dataset_root"] = cfg.dataset_root.string();
  j["output_root"] = cfg.output_root.string();
  j["class_map"] = cfg.class_map.string();
  if (cfg.label_remap) j["label_remap"] = cfg.label_remap->string();
  j["sequences"] = cfg.sequences;
  j["cameras"] = cfg.cameras;
  j["sampling"] = cfg.sampling == Sampling::Nearest ? "nearest" : "bilinear";
  j["refinement"] = {{"scheme", std::string(to_string(cfg.scheme))},
                     {"k", cfg.refine.k},
                     {"include_self", cfg.refine.include_self},
                     {"tie_break", cfg.refine.tie_break == TieBreak::LowestClass
                                       ? "lowest_class"
                                       : "keep_original"}};
  j["threshold"] = {{"mode", std::string(to_string(cfg.threshold.mode))},
                    {"tau_min", cfg.threshold.tau_min},
                    {"tau_max", cfg.threshold.tau_max}};
  j["augmentation"] = {{"translate_range_m", cfg.augmentation.translate_range_m},
                       {"squeeze_low", cfg.augmentation.squeeze.low},
                       {"squeeze_high", cfg.augmentation.squeeze.high},
                       {"sector_min_width", cfg.augmentation.sector.min_width},
                       {"sector_max_width", cfg.augmentation.sector.max_width}};
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  return j;
}

PipelineConfig read_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, path.string() + ": invalid JSON: " + e.what());
  }
  try {
    return config_from_json(j, path.parent_path());
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, path.string() + ": " + e.what());
  }
}

}  // namespace lidarlift
