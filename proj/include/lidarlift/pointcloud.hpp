#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace lidarlift {

/// Single LiDAR return in the sensor frame. Coordinates in meters, intensity
/// unitless in [0, 1]. Layout matches one 16-byte record of a Velodyne `.bin`.
struct Point {
  float x = 0.0F;
  float y = 0.0F;
  float z = 0.0F;
  float intensity = 0.0F;

  friend bool operator==(const Point&, const Point&) = default;
};

struct PointCloud {
  std::vector<Point> points;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }

  /// True when every coordinate and intensity is finite.
  bool valid() const noexcept;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

/// Per-point semantic class ids; `kIgnoreId` marks unlabeled/ignored points.
using Labels = std::vector<std::uint32_t>;
inline constexpr std::uint32_t kIgnoreId = 0;

struct LabeledCloud {
  PointCloud cloud;
  Labels labels;
};

/// N x C row-major per-point class probabilities. A row is either normalized
/// or masked (point outside every camera view); masked rows are stored as zeros.
struct PerPointProbs {
  std::size_t num_points = 0;
  std::size_t num_classes = 0;
  std::vector<float> values;
  std::vector<std::uint8_t> masked;

  PerPointProbs() = default;
  PerPointProbs(std::size_t n, std::size_t c)
      : num_points(n), num_classes(c), values(n * c, 0.0F), masked(n, 1) {}

  float* row(std::size_t i) noexcept { return values.data() + i * num_classes; }
  const float* row(std::size_t i) const noexcept { return values.data() + i * num_classes; }
  bool is_masked(std::size_t i) const noexcept { return masked[i] != 0; }

  /// Argmax per row with ties to the lowest class id; masked rows yield kIgnoreId.
  Labels argmax_labels() const;
  /// Max probability per row; 0 for masked rows.
  std::vector<float> max_confidence() const;
};

/// Rotation (row-major 3x3, orthonormal with det +1) plus translation in meters.
struct RigidTransform {
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 3> translation{0, 0, 0};

  static constexpr double kTolerance = 1e-6;

  static RigidTransform identity() { return {}; }
  static RigidTransform yaw(double radians);
  static RigidTransform translation_only(double x, double y, double z);

  bool is_identity() const noexcept;
  /// R Rᵀ = I and det R = 1 within `tolerance`.
  bool is_valid(double tolerance = kTolerance) const noexcept;
  RigidTransform inverse() const;
  RigidTransform compose(const RigidTransform& inner) const;  // this ∘ inner
};

enum class FlipAxis { X, Y, XY };

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t);
PointCloud flip(const PointCloud& cloud, FlipAxis axis);
PointCloud yaw_rotate(const PointCloud& cloud, double radians);

// Seeded augmentations. Each call draws from its own generator seeded by
// `seed`; there is no shared RNG state.

inline constexpr double kDefaultTranslateRange = 0.5;
inline constexpr double kDefaultSqueezeLow = 0.9;
inline constexpr double kDefaultSqueezeHigh = 1.1;

struct ScaleRange {
  double low = kDefaultSqueezeLow;
  double high = kDefaultSqueezeHigh;
};

/// The offset translate_jitter would apply for this seed.
std::array<double, 3> jitter_offset(std::uint64_t seed, double range_m);
PointCloud translate_jitter(const PointCloud& cloud, std::uint64_t seed,
                            double range_m = kDefaultTranslateRange);

double squeeze_factor(std::uint64_t seed, ScaleRange range);
PointCloud squeeze(const PointCloud& cloud, std::uint64_t seed, ScaleRange range = {});
/// Deterministic core of squeeze: scales x and y by `factor`.
PointCloud scale_xy(const PointCloud& cloud, double factor);

/// Azimuth sector [start, start + width), radians, start normalized to [0, 2π).
struct Sector {
  double start = 0.0;
  double width = 0.0;

  bool contains(const Point& p) const noexcept;
};

struct SectorMixOptions {
  double min_width = 1.5707963267948966;  // π/2
  double max_width = 3.141592653589793;   // π
};

Sector draw_sector(std::uint64_t seed, SectorMixOptions options = {});

/// Swaps the points (and labels) inside `sector` between `a` and `b`.
/// Output a = a outside the sector followed by b inside; output b symmetric.
std::pair<LabeledCloud, LabeledCloud> sector_mix(const LabeledCloud& a, const LabeledCloud& b,
                                                 const Sector& sector);
std::pair<LabeledCloud, LabeledCloud> sector_mix(const LabeledCloud& a, const LabeledCloud& b,
                                                 std::uint64_t seed,
                                                 SectorMixOptions options = {});

/// Azimuth of p in [0, 2π).
double azimuth(const Point& p) noexcept;

}  // namespace lidarlift
