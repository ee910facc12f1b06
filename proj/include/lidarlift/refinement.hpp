#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "lidarlift/kdtree.hpp"
#include "lidarlift/pointcloud.hpp"

namespace lidarlift {

enum class RefineScheme { Majority, DistanceWeighted, ConfidenceAverage };

std::string_view to_string(RefineScheme scheme) noexcept;
/// "majority" | "distance" | "confidence"; throws Config on anything else.
RefineScheme parse_refine_scheme(std::string_view name);

inline constexpr std::size_t kDefaultK = 19;

enum class TieBreak {
  LowestClass,   // tied classes resolve to the lowest id
  KeepOriginal,  // keep the point's own argmax when it is among the tied classes
};

struct RefineOptions {
  std::size_t k = kDefaultK;
  bool include_self = true;
  TieBreak tie_break = TieBreak::LowestClass;
  std::size_t jobs = 1;
};

/// Throws BadK unless k is odd, >= 1 and <= the number of indexed points.
void validate_k(std::size_t k, std::size_t indexed_points);

/// Only points indexed by `tree` are refined; every other point keeps
/// kIgnoreId (and a masked row for the probability outputs).
Labels refine_majority(const PerPointProbs& probs, const KdTree& tree,
                       const RefineOptions& options = {});

/// Neighbor j votes for its argmax class with weight 1 - softmax(d)_j, the
/// softmax taken over the K neighbor distances in meters.
Labels refine_distance_weighted(const PerPointProbs& probs, const KdTree& tree,
                                const RefineOptions& options = {});

struct ConfidenceAverage {
  Labels labels;
  PerPointProbs refined;
};

/// Refined row = unweighted mean of the K neighbor rows.
ConfidenceAverage refine_confidence_avg(const PerPointProbs& probs, const KdTree& tree,
                                        const RefineOptions& options = {});

/// Labels plus a per-point confidence for thresholding. For confidence
/// averaging the confidence is the refined row maximum; for the voting schemes
/// it is the share of the neighborhood's vote weight behind the winning class.
struct Refinement {
  Labels labels;
  PerPointProbs probs;
  std::vector<float> confidence;
};

Refinement refine(RefineScheme scheme, const PerPointProbs& probs, const KdTree& tree,
                  const RefineOptions& options = {});

/// 1 - softmax(distances), computed with the maximum-shifted exponent.
std::vector<double> distance_vote_weights(const std::vector<double>& distances);

}  // namespace lidarlift
