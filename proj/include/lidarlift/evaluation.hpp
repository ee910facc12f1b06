#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lidarlift/io.hpp"
#include "lidarlift/pointcloud.hpp"
#include "lidarlift/projection.hpp"

namespace lidarlift {

/// C x C counts, rows = ground truth, columns = prediction. Row kIgnoreId is
/// never filled; column kIgnoreId collects unlabeled predictions on labeled
/// points, which count as false negatives of the ground-truth class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes = 0)
      : classes_(num_classes), counts_(num_classes * num_classes, 0) {}

  std::size_t num_classes() const noexcept { return classes_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * classes_ + pred]; }
  std::uint64_t total() const noexcept;

  /// Throws SizeMismatch on length disagreement and UnknownClass on ids >= C.
  void accumulate(const Labels& gt, const Labels& pred, const FovMask* mask = nullptr);

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix accumulate(const Labels& gt, const Labels& pred, std::size_t num_classes,
                           const FovMask* mask = nullptr);

struct IouResult {
  /// Per class; nullopt for kIgnoreId and for classes absent from both gt and pred.
  std::vector<std::optional<double>> per_class;
  double miou = 0.0;
};

/// IoU_c = TP / (TP + FP + FN) over classes 1..C-1. Throws EmptyMatrix when
/// the matrix holds no evaluated point.
IouResult iou(const ConfusionMatrix& matrix);

struct ReductionStats {
  std::uint64_t removed = 0;
  std::uint64_t considered = 0;

  double fraction() const noexcept {
    return considered == 0 ? 0.0 : static_cast<double>(removed) / static_cast<double>(considered);
  }
  ReductionStats& operator+=(const ReductionStats& o) {
    removed += o.removed;
    considered += o.considered;
    return *this;
  }
};

struct Report {
  ConfusionMatrix total;
  IouResult result;
  std::optional<ReductionStats> reduction;

  /// "class_id,name,iou" rows, then "mIoU,<v>" and, with reduction stats,
  /// "point_reduction,<fraction>". Excluded classes print an empty iou.
  std::string csv(const ClassMap& classes) const;
  /// Human-readable table.
  std::string text(const ClassMap& classes) const;
};

/// Sums the per-scan matrices before computing IoU; reduction fractions are
/// pooled over scans, i.e. weighted by each scan's labeled point count.
Report report(const std::vector<ConfusionMatrix>& scans,
              const std::vector<ReductionStats>& reductions = {});

}  // namespace lidarlift
