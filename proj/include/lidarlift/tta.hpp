#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lidarlift/pointcloud.hpp"

namespace lidarlift {

// --- test-time augmentation ------------------------------------------------

enum class VariantKind { Identity, FlipX, FlipY, FlipXY, Yaw };

struct TtaVariant {
  VariantKind kind = VariantKind::Identity;
  double yaw_degrees = 0.0;  // only for VariantKind::Yaw

  std::string name() const;
  PointCloud apply(const PointCloud& cloud) const;
  friend bool operator==(const TtaVariant&, const TtaVariant&) = default;
};

inline constexpr double kTtaYawStepDegrees = 40.0;
inline constexpr std::size_t kTtaRotations = 8;

/// Identity, flip X, flip Y, flip XY, then yaw k · 40° for k = 1..8.
std::vector<TtaVariant> default_tta_spec();

/// Exactly 12 distinct entries with identity first.
bool is_valid_tta_spec(const std::vector<TtaVariant>& spec);

/// Point order is preserved: index i is the same physical point in every variant.
std::vector<PointCloud> emit_variants(const PointCloud& cloud,
                                      const std::vector<TtaVariant>& spec);

/// [{"index", "name", "transform", "yaw_degrees"?, "file"?}, ...]
nlohmann::json variant_manifest(const std::vector<TtaVariant>& spec,
                                const std::vector<std::string>& files = {});

/// Per-point arithmetic mean over variants of the probability rows; a point is
/// masked only if masked in every variant, otherwise averaged over the
/// variants that predict it. Throws DimMismatch on shape disagreement and
/// EmptyInput on an empty list.
PerPointProbs aggregate_tta(const std::vector<PerPointProbs>& variants);

// --- greedy soup -----------------------------------------------------------

using WeightVector = std::vector<float>;
/// Higher is better. Throws on evaluation failure.
using SoupMetric = std::function<double(const WeightVector&)>;

struct SoupStep {
  std::size_t candidate = 0;  // input position
  double solo_metric = 0.0;
  double soup_metric = 0.0;   // metric of the soup including this candidate
  bool accepted = false;
};

struct SoupResult {
  WeightVector weights;
  double metric = 0.0;
  std::vector<std::size_t> included;  // input positions, in acceptance order
  std::vector<SoupStep> log;          // greedy pass in solo-metric order
  std::size_t evaluations = 0;
};

/// Uniform mean of the selected vectors, accumulated in double.
WeightVector average_weights(const std::vector<WeightVector>& candidates,
                             const std::vector<std::size_t>& members);

/// Ranks candidates by solo metric (descending, ties by input order), starts
/// the soup with the best, and keeps each next candidate iff the averaged
/// soup's metric is >= the current soup metric. Throws EmptyInput or
/// LengthMismatch.
SoupResult greedy_soup(const std::vector<WeightVector>& candidates, const SoupMetric& metric);

/// Runs `command` (argv) with the weight file path appended and parses one
/// decimal scalar from its standard output. Throws EvalCommandFailed on a
/// launch failure, nonzero exit, or unparseable output.
double run_eval_command(const std::vector<std::string>& command, const std::string& weight_path);

}  // namespace lidarlift
