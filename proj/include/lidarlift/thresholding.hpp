#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lidarlift/io.hpp"
#include "lidarlift/pointcloud.hpp"

namespace lidarlift {

/// Per-class label counts over a corpus. Index = class id.
struct ClassHistogram {
  std::vector<std::uint64_t> counts;

  explicit ClassHistogram(std::size_t num_classes = 0) : counts(num_classes, 0) {}

  std::size_t num_classes() const noexcept { return counts.size(); }
  /// Largest count over every class except kIgnoreId.
  std::uint64_t max_count() const noexcept;

  /// Adds one scan's labels; throws UnknownClass for ids >= num_classes().
  void add(std::span<const std::uint32_t> labels);
  /// Associative, commutative merge of partial histograms.
  ClassHistogram& operator+=(const ClassHistogram& other);

  friend bool operator==(const ClassHistogram&, const ClassHistogram&) = default;
};

ClassHistogram histogram(const std::vector<Labels>& corpus, std::size_t num_classes);

enum class ThresholdMode { Static, ClassBalanced };

inline constexpr double kDefaultTauMin = 0.8;
inline constexpr double kDefaultTauMax = 0.95;

struct ThresholdConfig {
  double tau_min = kDefaultTauMin;
  double tau_max = kDefaultTauMax;
  ThresholdMode mode = ThresholdMode::ClassBalanced;

  /// Throws Config unless 0 <= tau_min <= tau_max <= 1.
  void validate() const;
};

std::string_view to_string(ThresholdMode mode) noexcept;
ThresholdMode parse_threshold_mode(std::string_view name);

/// Class-balanced thresholds: τ(i) = count_i / max_count · (τ_max − τ_min) + τ_min.
/// The majority class gets τ_max exactly and an absent class τ_min exactly.
/// Throws EmptyHistogram when every non-ignore count is zero.
std::vector<double> class_thresholds(const ClassHistogram& hist, const ThresholdConfig& cfg);

/// Static mode: every class gets cfg.tau_max.
std::vector<double> static_thresholds(const ThresholdConfig& cfg, std::size_t num_classes);

/// Dispatches on cfg.mode.
std::vector<double> thresholds_for(const ClassHistogram& hist, const ThresholdConfig& cfg);

struct ThresholdResult {
  Labels labels;
  std::uint64_t removed = 0;
  std::uint64_t considered = 0;  // points carrying a pseudo-label before thresholding

  double reduction() const noexcept {
    return considered == 0 ? 0.0 : static_cast<double>(removed) / static_cast<double>(considered);
  }
};

/// Points whose confidence is strictly below the threshold of their label
/// become kIgnoreId; a confidence equal to the threshold is kept.
ThresholdResult apply_threshold(const Labels& labels, std::span<const float> confidences,
                                std::span<const double> thresholds);

// CSV: "class_id,count" and "class_id,tau", one row per class.
std::string format_histogram_csv(const ClassHistogram& hist);
ClassHistogram parse_histogram_csv(std::string_view text);
std::string format_thresholds_csv(std::span<const double> thresholds);
std::vector<double> parse_thresholds_csv(std::string_view text);

}  // namespace lidarlift
