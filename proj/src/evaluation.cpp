#include "lidarlift/evaluation.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

#include "lidarlift/error.hpp"

namespace lidarlift {

std::uint64_t ConfusionMatrix::total() const noexcept {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

void ConfusionMatrix::accumulate(const Labels& gt, const Labels& pred, const FovMask* mask) {
  if (gt.size() != pred.size()) {
    throw Error(ErrorKind::SizeMismatch, std::to_string(gt.size()) + " ground-truth labels vs " +
                                             std::to_string(pred.size()) + " predictions");
  }
  if (mask != nullptr && mask->size() != gt.size()) {
    throw Error(ErrorKind::SizeMismatch, "mask length " + std::to_string(mask->size()) +
                                             " vs " + std::to_string(gt.size()) + " labels");
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (mask != nullptr && !(*mask)[i]) continue;
    if (gt[i] == kIgnoreId) continue;
    if (gt[i] >= classes_ || pred[i] >= classes_) {
      throw Error(ErrorKind::UnknownClass, "point " + std::to_string(i) + " has a class id >= " +
                                               std::to_string(classes_));
    }
    ++counts_[gt[i] * classes_ + pred[i]];
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) {
    throw Error(ErrorKind::DimMismatch, "confusion matrices have different class counts");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ConfusionMatrix accumulate(const Labels& gt, const Labels& pred, std::size_t num_classes,
                           const FovMask* mask) {
  ConfusionMatrix m(num_classes);
  m.accumulate(gt, pred, mask);
  return m;
}

IouResult iou(const ConfusionMatrix& matrix) {
  if (matrix.total() == 0) throw Error(ErrorKind::EmptyMatrix, "no evaluated points");
  const std::size_t n = matrix.num_classes();
  IouResult out;
  out.per_class.assign(n, std::nullopt);
  double sum = 0.0;
  std::size_t included = 0;
  for (std::size_t c = 1; c < n; ++c) {
    const std::uint64_t tp = matrix.at(c, c);
    std::uint64_t fn = 0;
    std::uint64_t fp = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == c) continue;
      fn += matrix.at(c, k);
      fp += matrix.at(k, c);
    }
    const std::uint64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    const double value = static_cast<double>(tp) / static_cast<double>(denom);
    out.per_class[c] = value;
    sum += value;
    ++included;
  }
  out.miou = included == 0 ? 0.0 : sum / static_cast<double>(included);
  return out;
}

Report report(const std::vector<ConfusionMatrix>& scans,
              const std::vector<ReductionStats>& reductions) {
  if (scans.empty()) throw Error(ErrorKind::EmptyMatrix, "report needs at least one scan");
  Report r{scans.front(), {}, std::nullopt};
  for (std::size_t i = 1; i < scans.size(); ++i) r.total += scans[i];
  r.result = iou(r.total);
  if (!reductions.empty()) {
    ReductionStats pooled;
    for (const auto& s : reductions) pooled += s;
    r.reduction = pooled;
  }
  return r;
}

std::string Report::csv(const ClassMap& classes) const {
  std::string out = "class_id,name,iou\n";
  for (std::size_t c = 1; c < result.per_class.size(); ++c) {
    out += std::to_string(c) + "," + (c < classes.size() ? classes.names[c] : "") + ",";
    if (result.per_class[c]) out += format_double(*result.per_class[c]);
    out += "\n";
  }
  out += "mIoU," + format_double(result.miou) + "\n";
  if (reduction) out += "point_reduction," + format_double(reduction->fraction()) + "\n";
  return out;
}

std::string Report::text(const ClassMap& classes) const {
  std::ostringstream out;
  char buf[128];
  for (std::size_t c = 1; c < result.per_class.size(); ++c) {
    const std::string name = c < classes.size() ? classes.names[c] : std::to_string(c);
    if (result.per_class[c]) {
      std::snprintf(buf, sizeof(buf), "  %-20s %7.2f\n", name.c_str(), 100.0 * *result.per_class[c]);
    } else {
      std::snprintf(buf, sizeof(buf), "  %-20s %7s\n", name.c_str(), "-");
    }
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "mIoU %.4f (%llu points)\n", result.miou,
                static_cast<unsigned long long>(total.total()));
  out << buf;
  if (reduction) {
    std::snprintf(buf, sizeof(buf), "point reduction %.2f%% (%llu of %llu)\n",
                  100.0 * reduction->fraction(),
                  static_cast<unsigned long long>(reduction->removed),
                  static_cast<unsigned long long>(reduction->considered));
    out << buf;
  }
  return out.str();
}

}  // namespace lidarlift
