#include "lidarlift/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lidarlift/error.hpp"
#include "lidarlift/parallel.hpp"

namespace lidarlift {

namespace {

std::uint32_t row_argmax(const PerPointProbs& probs, std::uint32_t i) {
  if (probs.is_masked(i)) return kIgnoreId;
  const float* r = probs.row(i);
  std::size_t best = 0;
  for (std::size_t c = 1; c < probs.num_classes; ++c) {
    if (r[c] > r[best]) best = c;
  }
  return static_cast<std::uint32_t>(best);
}

/// Winner among classes that received at least one vote. `own` is the query
/// point's own argmax, used by TieBreak::KeepOriginal.
std::uint32_t pick_winner(const std::vector<double>& score, const std::vector<std::uint8_t>& voted,
                          std::uint32_t own, TieBreak tie_break) {
  std::size_t best = score.size();
  for (std::size_t c = 0; c < score.size(); ++c) {
    if (!voted[c]) continue;
    if (best == score.size() || score[c] > score[best]) best = c;
  }
  if (tie_break == TieBreak::KeepOriginal && own < score.size() && voted[own] &&
      score[own] == score[best]) {
    return own;
  }
  return static_cast<std::uint32_t>(best);
}

struct Vote {
  std::uint32_t label = kIgnoreId;
  float confidence = 0.0F;
};

Vote vote(const PerPointProbs& probs, const Neighborhood& hood, bool distance_weighted,
          TieBreak tie_break) {
  std::vector<double> score(probs.num_classes, 0.0);
  std::vector<std::uint8_t> voted(probs.num_classes, 0);
  std::vector<double> weights;
  if (distance_weighted) {
    std::vector<double> d;
    d.reserve(hood.neighbors.size());
    for (const auto& n : hood.neighbors) d.push_back(n.distance);
    weights = distance_vote_weights(d);
  } else {
    weights.assign(hood.neighbors.size(), 1.0);
  }
  double total = 0.0;
  for (std::size_t j = 0; j < hood.neighbors.size(); ++j) {
    const auto c = row_argmax(probs, hood.neighbors[j].index);
    score[c] += weights[j];
    voted[c] = 1;
    total += weights[j];
  }
  Vote v;
  v.label = pick_winner(score, voted, row_argmax(probs, hood.query), tie_break);
  v.confidence = total > 0.0 ? static_cast<float>(score[v.label] / total) : 1.0F;
  return v;
}

void check_inputs(const PerPointProbs& probs, const KdTree& tree, const RefineOptions& options) {
  if (!tree.indexed().empty() && tree.indexed().back() >= probs.num_points) {
    throw Error(ErrorKind::SizeMismatch, "tree indexes points beyond the probability rows");
  }
  validate_k(options.k, tree.size());
}

}  // namespace

std::string_view to_string(RefineScheme scheme) noexcept {
  switch (scheme) {
    case RefineScheme::Majority: return "majority";
    case RefineScheme::DistanceWeighted: return "distance";
    case RefineScheme::ConfidenceAverage: return "confidence";
  }
  return "?";
}

RefineScheme parse_refine_scheme(std::string_view name) {
  if (name == "majority") return RefineScheme::Majority;
  if (name == "distance") return RefineScheme::DistanceWeighted;
  if (name == "confidence") return RefineScheme::ConfidenceAverage;
  throw Error(ErrorKind::Config, "unknown refinement scheme '" + std::string(name) +
                                     "' (expected majority, distance or confidence)");
}

void validate_k(std::size_t k, std::size_t indexed_points) {
  if (k == 0 || k % 2 == 0) {
    throw Error(ErrorKind::BadK, "K must be odd and >= 1, got " + std::to_string(k));
  }
  if (k > indexed_points) {
    throw Error(ErrorKind::BadK, "K=" + std::to_string(k) + " exceeds the " +
                                     std::to_string(indexed_points) + " indexed points");
  }
}

std::vector<double> distance_vote_weights(const std::vector<double>& distances) {
  std::vector<double> w(distances.size());
  if (distances.empty()) return w;
  const double peak = *std::max_element(distances.begin(), distances.end());
  double sum = 0.0;
  for (std::size_t j = 0; j < distances.size(); ++j) {
    w[j] = std::exp(distances[j] - peak);
    sum += w[j];
  }
  for (auto& v : w) v = 1.0 - v / sum;
  return w;
}

Refinement refine(RefineScheme scheme, const PerPointProbs& probs, const KdTree& tree,
                  const RefineOptions& options) {
  check_inputs(probs, tree, options);
  Refinement out;
  out.labels.assign(probs.num_points, kIgnoreId);
  out.confidence.assign(probs.num_points, 0.0F);
  out.probs = PerPointProbs(probs.num_points, probs.num_classes);

  const auto& indexed = tree.indexed();
  parallel_for(indexed.size(), options.jobs, [&](std::size_t slot) {
    const std::uint32_t i = indexed[slot];
    const auto hood = tree.neighborhood(i, options.k, options.include_self);
    if (scheme != RefineScheme::ConfidenceAverage) {
      const auto v = vote(probs, hood, scheme == RefineScheme::DistanceWeighted,
                          options.tie_break);
      out.labels[i] = v.label;
      out.confidence[i] = v.confidence;
      // Vote schemes emit the original row; they only change the label.
      if (!probs.is_masked(i)) {
        std::copy(probs.row(i), probs.row(i) + probs.num_classes, out.probs.row(i));
        out.probs.masked[i] = 0;
      }
      return;
    }

    std::vector<double> acc(probs.num_classes, 0.0);
    for (const auto& n : hood.neighbors) {
      const float* r = probs.row(n.index);
      for (std::size_t c = 0; c < probs.num_classes; ++c) acc[c] += r[c];
    }
    const double k = static_cast<double>(hood.neighbors.size());
    float* dst = out.probs.row(i);
    std::vector<double> score(probs.num_classes);
    for (std::size_t c = 0; c < probs.num_classes; ++c) {
      dst[c] = static_cast<float>(acc[c] / k);
      score[c] = dst[c];
    }
    out.probs.masked[i] = 0;
    const std::vector<std::uint8_t> all(probs.num_classes, 1);
    const auto label = pick_winner(score, all, row_argmax(probs, i), options.tie_break);
    out.labels[i] = label;
    out.confidence[i] = dst[label];
  });
  return out;
}

Labels refine_majority(const PerPointProbs& probs, const KdTree& tree,
                       const RefineOptions& options) {
  return refine(RefineScheme::Majority, probs, tree, options).labels;
}

Labels refine_distance_weighted(const PerPointProbs& probs, const KdTree& tree,
                                const RefineOptions& options) {
  return refine(RefineScheme::DistanceWeighted, probs, tree, options).labels;
}

ConfidenceAverage refine_confidence_avg(const PerPointProbs& probs, const KdTree& tree,
                                        const RefineOptions& options) {
  auto r = refine(RefineScheme::ConfidenceAverage, probs, tree, options);
  return {std::move(r.labels), std::move(r.probs)};
}

}  // namespace lidarlift
