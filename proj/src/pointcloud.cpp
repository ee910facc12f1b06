#include "lidarlift/pointcloud.hpp"

#include <cmath>
#include <numbers>

#include "lidarlift/rng.hpp"

namespace lidarlift {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Point transformed(const Point& p, const RigidTransform& t) {
  const auto& r = t.rotation;
  const double x = p.x;
  const double y = p.y;
  const double z = p.z;
  return {static_cast<float>(r[0] * x + r[1] * y + r[2] * z + t.translation[0]),
          static_cast<float>(r[3] * x + r[4] * y + r[5] * z + t.translation[1]),
          static_cast<float>(r[6] * x + r[7] * y + r[8] * z + t.translation[2]), p.intensity};
}

}  // namespace

bool PointCloud::valid() const noexcept {
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) ||
        !std::isfinite(p.intensity)) {
      return false;
    }
  }
  return true;
}

Labels PerPointProbs::argmax_labels() const {
  Labels out(num_points, kIgnoreId);
  for (std::size_t i = 0; i < num_points; ++i) {
    if (is_masked(i)) continue;
    const float* r = row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < num_classes; ++c) {
      if (r[c] > r[best]) best = c;
    }
    out[i] = static_cast<std::uint32_t>(best);
  }
  return out;
}

std::vector<float> PerPointProbs::max_confidence() const {
  std::vector<float> out(num_points, 0.0F);
  for (std::size_t i = 0; i < num_points; ++i) {
    if (is_masked(i)) continue;
    const float* r = row(i);
    float best = r[0];
    for (std::size_t c = 1; c < num_classes; ++c) best = std::max(best, r[c]);
    out[i] = best;
  }
  return out;
}

RigidTransform RigidTransform::yaw(double radians) {
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  RigidTransform t;
  t.rotation = {c, -s, 0, s, c, 0, 0, 0, 1};
  return t;
}

RigidTransform RigidTransform::translation_only(double x, double y, double z) {
  RigidTransform t;
  t.translation = {x, y, z};
  return t;
}

bool RigidTransform::is_identity() const noexcept {
  return rotation == RigidTransform{}.rotation && translation == RigidTransform{}.translation;
}

bool RigidTransform::is_valid(double tolerance) const noexcept {
  const auto& r = rotation;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += r[i * 3 + k] * r[j * 3 + k];
      if (std::abs(dot - (i == j ? 1.0 : 0.0)) > tolerance) return false;
    }
  }
  const double det = r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
                     r[2] * (r[3] * r[7] - r[4] * r[6]);
  for (double v : translation) {
    if (!std::isfinite(v)) return false;
  }
  return std::abs(det - 1.0) <= tolerance;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) inv.rotation[i * 3 + j] = rotation[j * 3 + i];
  }
  for (int i = 0; i < 3; ++i) {
    inv.translation[i] = -(inv.rotation[i * 3 + 0] * translation[0] +
                           inv.rotation[i * 3 + 1] * translation[1] +
                           inv.rotation[i * 3 + 2] * translation[2]);
  }
  return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& inner) const {
  RigidTransform out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double v = 0.0;
      for (int k = 0; k < 3; ++k) v += rotation[i * 3 + k] * inner.rotation[k * 3 + j];
      out.rotation[i * 3 + j] = v;
    }
    out.translation[i] = rotation[i * 3 + 0] * inner.translation[0] +
                         rotation[i * 3 + 1] * inner.translation[1] +
                         rotation[i * 3 + 2] * inner.translation[2] + translation[i];
  }
  return out;
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
  if (t.is_identity()) return cloud;
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(transformed(p, t));
  return out;
}

PointCloud flip(const PointCloud& cloud, FlipAxis axis) {
  PointCloud out = cloud;
  const bool negate_x = axis == FlipAxis::X || axis == FlipAxis::XY;
  const bool negate_y = axis == FlipAxis::Y || axis == FlipAxis::XY;
  for (auto& p : out.points) {
    if (negate_x) p.x = -p.x;
    if (negate_y) p.y = -p.y;
  }
  return out;
}

PointCloud yaw_rotate(const PointCloud& cloud, double radians) {
  if (radians == 0.0) return cloud;
  PointCloud out = cloud;
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  for (auto& p : out.points) {
    const double x = p.x;
    const double y = p.y;
    p.x = static_cast<float>(c * x - s * y);
    p.y = static_cast<float>(s * x + c * y);
  }
  return out;
}

std::array<double, 3> jitter_offset(std::uint64_t seed, double range_m) {
  Rng rng(seed);
  std::array<double, 3> offset{};
  for (auto& v : offset) v = rng.uniform(-range_m, range_m);
  return offset;
}

PointCloud translate_jitter(const PointCloud& cloud, std::uint64_t seed, double range_m) {
  if (range_m == 0.0) return cloud;
  const auto offset = jitter_offset(seed, range_m);
  PointCloud out = cloud;
  for (auto& p : out.points) {
    p.x = static_cast<float>(p.x + offset[0]);
    p.y = static_cast<float>(p.y + offset[1]);
    p.z = static_cast<float>(p.z + offset[2]);
  }
  return out;
}

double squeeze_factor(std::uint64_t seed, ScaleRange range) {
  if (range.low == range.high) return range.low;
  Rng rng(seed);
  return rng.uniform(range.low, range.high);
}

PointCloud scale_xy(const PointCloud& cloud, double factor) {
  if (factor == 1.0) return cloud;
  PointCloud out = cloud;
  for (auto& p : out.points) {
    p.x = static_cast<float>(p.x * factor);
    p.y = static_cast<float>(p.y * factor);
  }
  return out;
}

PointCloud squeeze(const PointCloud& cloud, std::uint64_t seed, ScaleRange range) {
  return scale_xy(cloud, squeeze_factor(seed, range));
}

double azimuth(const Point& p) noexcept {
  double a = std::atan2(static_cast<double>(p.y), static_cast<double>(p.x));
  if (a < 0.0) a += kTwoPi;
  return a >= kTwoPi ? 0.0 : a;
}

bool Sector::contains(const Point& p) const noexcept {
  double rel = azimuth(p) - start;
  if (rel < 0.0) rel += kTwoPi;
  return rel < width;
}

Sector draw_sector(std::uint64_t seed, SectorMixOptions options) {
  Rng rng(seed);
  Sector s;
  s.start = rng.uniform(0.0, kTwoPi);
  s.width = rng.uniform(options.min_width, options.max_width);
  return s;
}

std::pair<LabeledCloud, LabeledCloud> sector_mix(const LabeledCloud& a, const LabeledCloud& b,
                                                 const Sector& sector) {
  auto split = [&](const LabeledCloud& src, LabeledCloud& outside, LabeledCloud& inside) {
    for (std::size_t i = 0; i < src.cloud.size(); ++i) {
      const auto& p = src.cloud.points[i];
      auto& dst = sector.contains(p) ? inside : outside;
      dst.cloud.points.push_back(p);
      if (i < src.labels.size()) dst.labels.push_back(src.labels[i]);
    }
  };
  LabeledCloud a_out, a_in, b_out, b_in;
  split(a, a_out, a_in);
  split(b, b_out, b_in);

  auto append = [](LabeledCloud& dst, const LabeledCloud& src) {
    dst.cloud.points.insert(dst.cloud.points.end(), src.cloud.points.begin(),
                            src.cloud.points.end());
    dst.labels.insert(dst.labels.end(), src.labels.begin(), src.labels.end());
  };
  append(a_out, b_in);
  append(b_out, a_in);
  return {std::move(a_out), std::move(b_out)};
}

std::pair<LabeledCloud, LabeledCloud> sector_mix(const LabeledCloud& a, const LabeledCloud& b,
                                                 std::uint64_t seed, SectorMixOptions options) {
  return sector_mix(a, b, draw_sector(seed, options));
}

}  // namespace lidarlift
