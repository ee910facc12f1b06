#include "lidarlift/thresholding.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "lidarlift/error.hpp"

namespace lidarlift {

namespace {

template <typename Row>
std::vector<Row> parse_csv_pairs(std::string_view text, std::string_view header,
                                 std::string_view what) {
  std::vector<Row> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line == header) continue;
    const auto comma = line.find(',');
    Row row{};
    bool ok = comma != std::string::npos;
    if (ok) {
      const char* b = line.data();
      auto r1 = std::from_chars(b, b + comma, row.first);
      auto r2 = std::from_chars(b + comma + 1, b + line.size(), row.second);
      ok = r1.ec == std::errc{} && r1.ptr == b + comma && r2.ec == std::errc{} &&
           r2.ptr == b + line.size();
    }
    if (!ok) {
      throw Error(ErrorKind::Parse,
                  std::string(what) + " line " + std::to_string(line_no) + ": '" + line + "'");
    }
    if (row.first != rows.size()) {
      throw Error(ErrorKind::Parse, std::string(what) + " line " + std::to_string(line_no) +
                                        ": class ids must be listed densely from 0");
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::uint64_t ClassHistogram::max_count() const noexcept {
  std::uint64_t m = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (c != kIgnoreId) m = std::max(m, counts[c]);
  }
  return m;
}

void ClassHistogram::add(std::span<const std::uint32_t> labels) {
  for (auto l : labels) {
    if (l >= counts.size()) {
      throw Error(ErrorKind::UnknownClass, "label " + std::to_string(l) + " outside " +
                                               std::to_string(counts.size()) + " classes");
    }
    ++counts[l];
  }
}

ClassHistogram& ClassHistogram::operator+=(const ClassHistogram& other) {
  if (other.counts.size() > counts.size()) counts.resize(other.counts.size(), 0);
  for (std::size_t c = 0; c < other.counts.size(); ++c) counts[c] += other.counts[c];
  return *this;
}

ClassHistogram histogram(const std::vector<Labels>& corpus, std::size_t num_classes) {
  ClassHistogram h(num_classes);
  for (const auto& labels : corpus) h.add(labels);
  return h;
}

void ThresholdConfig::validate() const {
  if (!(tau_min >= 0.0 && tau_min <= tau_max && tau_max <= 1.0)) {
    throw Error(ErrorKind::Config, "thresholds must satisfy 0 <= tau_min <= tau_max <= 1 (got " +
                                       format_double(tau_min) + ", " + format_double(tau_max) +
                                       ")");
  }
}

std::string_view to_string(ThresholdMode mode) noexcept {
  return mode == ThresholdMode::Static ? "static" : "class_balanced";
}

ThresholdMode parse_threshold_mode(std::string_view name) {
  if (name == "static") return ThresholdMode::Static;
  if (name == "class_balanced") return ThresholdMode::ClassBalanced;
  throw Error(ErrorKind::Config, "unknown threshold mode '" + std::string(name) +
                                     "' (expected static or class_balanced)");
}

std::vector<double> class_thresholds(const ClassHistogram& hist, const ThresholdConfig& cfg) {
  cfg.validate();
  const std::uint64_t max_count = hist.max_count();
  if (max_count == 0) throw Error(ErrorKind::EmptyHistogram, "no labeled points in histogram");
  const double span = cfg.tau_max - cfg.tau_min;
  std::vector<double> tau(hist.num_classes());
  for (std::size_t c = 0; c < tau.size(); ++c) {
    const std::uint64_t count = hist.counts[c];
    if (count >= max_count) {
      tau[c] = cfg.tau_max;  // (τ_max − τ_min) + τ_min can round away from τ_max
    } else {
      const double ratio = static_cast<double>(count) / static_cast<double>(max_count);
      tau[c] = std::clamp(ratio * span + cfg.tau_min, cfg.tau_min, cfg.tau_max);
    }
  }
  return tau;
}

std::vector<double> static_thresholds(const ThresholdConfig& cfg, std::size_t num_classes) {
  cfg.validate();
  return std::vector<double>(num_classes, cfg.tau_max);
}

std::vector<double> thresholds_for(const ClassHistogram& hist, const ThresholdConfig& cfg) {
  return cfg.mode == ThresholdMode::Static ? static_thresholds(cfg, hist.num_classes())
                                           : class_thresholds(hist, cfg);
}

ThresholdResult apply_threshold(const Labels& labels, std::span<const float> confidences,
                                std::span<const double> thresholds) {
  if (labels.size() != confidences.size()) {
    throw Error(ErrorKind::SizeMismatch, std::to_string(labels.size()) + " labels vs " +
                                             std::to_string(confidences.size()) +
                                             " confidences");
  }
  ThresholdResult out;
  out.labels = labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto l = labels[i];
    if (l == kIgnoreId) continue;
    if (l >= thresholds.size()) {
      throw Error(ErrorKind::UnknownClass, "label " + std::to_string(l) + " has no threshold");
    }
    ++out.considered;
    if (static_cast<double>(confidences[i]) < thresholds[l]) {
      out.labels[i] = kIgnoreId;
      ++out.removed;
    }
  }
  return out;
}

std::string format_histogram_csv(const ClassHistogram& hist) {
  std::string out = "class_id,count\n";
  for (std::size_t c = 0; c < hist.counts.size(); ++c) {
    out += std::to_string(c) + "," + std::to_string(hist.counts[c]) + "\n";
  }
  return out;
}

ClassHistogram parse_histogram_csv(std::string_view text) {
  const auto rows =
      parse_csv_pairs<std::pair<std::size_t, std::uint64_t>>(text, "class_id,count", "histogram");
  ClassHistogram h(rows.size());
  for (const auto& [c, n] : rows) h.counts[c] = n;
  return h;
}

std::string format_thresholds_csv(std::span<const double> thresholds) {
  std::string out = "class_id,tau\n";
  for (std::size_t c = 0; c < thresholds.size(); ++c) {
    out += std::to_string(c) + "," + format_double(thresholds[c]) + "\n";
  }
  return out;
}

std::vector<double> parse_thresholds_csv(std::string_view text) {
  const auto rows =
      parse_csv_pairs<std::pair<std::size_t, double>>(text, "class_id,tau", "thresholds");
  std::vector<double> tau;
  tau.reserve(rows.size());
  for (const auto& [c, t] : rows) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw Error(ErrorKind::Parse, "threshold for class " + std::to_string(c) + " not in [0,1]");
    }
    tau.push_back(t);
  }
  return tau;
}

}  // namespace lidarlift
