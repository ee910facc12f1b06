#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lidarlift/pointcloud.hpp"
#include "lidarlift/projection.hpp"
#include "lidarlift/refinement.hpp"
#include "lidarlift/thresholding.hpp"

namespace lidarlift {

struct AugmentationConfig {
  double translate_range_m = kDefaultTranslateRange;
  ScaleRange squeeze{};
  SectorMixOptions sector{};
};

/// Batch pipeline settings. Every relative path is resolved against the
/// directory of the config file when loaded from disk.
struct PipelineConfig {
  std::filesystem::path dataset_root;
  std::filesystem::path output_root;
  std::filesystem::path class_map;
  std::optional<std::filesystem::path> label_remap;
  std::vector<std::string> sequences;  // empty = every sequence found
  std::vector<std::string> cameras{"image_2"};
  Sampling sampling = Sampling::Nearest;
  RefineScheme scheme = RefineScheme::ConfidenceAverage;
  RefineOptions refine{};
  ThresholdConfig threshold{};
  AugmentationConfig augmentation{};
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  /// Throws Config on any invalid value (even K, bad τ range, no camera...).
  void validate() const;
};

/// Throws Config on unknown keys, wrong types or invalid values.
PipelineConfig config_from_json(const nlohmann::json& j,
                                const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig read_config(const std::filesystem::path& path);

/// "image_2" -> "P2".
std::string calib_key_for_camera(const std::string& camera);

}  // namespace lidarlift
