#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lidarlift/config.hpp"
#include "lidarlift/evaluation.hpp"
#include "lidarlift/io.hpp"
#include "lidarlift/thresholding.hpp"

namespace lidarlift {

struct ScanId {
  std::string sequence;
  std::string frame;

  friend auto operator<=>(const ScanId&, const ScanId&) = default;
};

/// SemanticKITTI-style paths. Inputs live under the dataset root
/// (sequences/SS/{velodyne,labels,calib.txt,probs_2d/<camera>}); every stage
/// output lives under the output root in the same sequences/SS tree.
class DatasetLayout {
 public:
  explicit DatasetLayout(const PipelineConfig& cfg) : cfg_(&cfg) {}

  std::filesystem::path sequence_dir(const std::string& seq) const;
  std::filesystem::path cloud(const ScanId& s) const;
  std::filesystem::path gt_labels(const ScanId& s) const;
  std::filesystem::path calib(const std::string& seq) const;
  std::filesystem::path probs_2d(const ScanId& s, const std::string& camera) const;

  /// `stage` is a directory name such as "lifted" or "pseudo".
  std::filesystem::path output(const ScanId& s, const std::string& stage,
                               const std::string& extension) const;
  std::filesystem::path output_root_file(const std::string& name) const;

 private:
  const PipelineConfig* cfg_;
};

/// Scans with a velodyne cloud, sorted by (sequence, frame).
std::vector<ScanId> discover_scans(const PipelineConfig& cfg);

/// Checks that the dataset root, class map and remap exist before any work.
void check_inputs(const PipelineConfig& cfg);

struct StageSummary {
  std::size_t scans = 0;
  std::size_t points = 0;
  std::size_t selected = 0;  // points in FOV / kept, stage dependent
};

/// probs_2d + velodyne + calib -> lifted/*.ptns (N x C) and fov/*.ptns (u8 N).
StageSummary run_lift(const PipelineConfig& cfg, const std::vector<ScanId>& scans);

/// lifted + fov -> refined/*.ptns, refined_labels/*.label, confidence/*.ptns.
StageSummary run_refine(const PipelineConfig& cfg, const std::vector<ScanId>& scans);

/// First corpus pass over refined_labels -> histogram.csv and thresholds.csv.
ClassHistogram run_stats(const PipelineConfig& cfg, const std::vector<ScanId>& scans);

/// refined_labels + confidence + thresholds.csv -> pseudo/*.label and
/// reduction.csv. Returns the pooled reduction.
ReductionStats run_threshold(const PipelineConfig& cfg, const std::vector<ScanId>& scans);

/// velodyne + fov (+ `label_stage` labels) -> sliced/{velodyne,labels,index}.
StageSummary run_slice(const PipelineConfig& cfg, const std::vector<ScanId>& scans,
                       const std::string& label_stage = "pseudo");

/// Evaluates `pred_stage` labels against ground truth, optionally in FOV.
/// Writes eval_<pred_stage>[_fov].csv under the output root.
Report run_eval(const PipelineConfig& cfg, const std::vector<ScanId>& scans,
                const std::string& pred_stage, bool fov_only);

/// lift -> refine -> stats -> threshold.
ReductionStats run_pipeline(const PipelineConfig& cfg, const std::vector<ScanId>& scans);

// --- synthetic corpus --------------------------------------------------------

struct SynthOptions {
  std::size_t scenes = 10;
  std::uint64_t seed = 0;
  double border_rate = 0.5;
  double body_rate = 0.0;
  std::string sequence = "00";
};

/// Writes a complete dataset (velodyne, gt labels, calib.txt, probs_2d,
/// class_map.csv and config.json) under `root`.
void write_synthetic_dataset(const std::filesystem::path& root, const SynthOptions& options);

}  // namespace lidarlift
