#pragma once

#include <cstdint>
#include <vector>

#include "lidarlift/camera.hpp"
#include "lidarlift/io.hpp"
#include "lidarlift/pointcloud.hpp"

namespace lidarlift {

struct PixelProjection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // camera-frame z, meters
  bool valid = false;  // in front of the camera
};

/// x_img = P · T · [x, y, z, 1]ᵀ; u = x_img₀ / x_img₂, v = x_img₁ / x_img₂.
std::vector<PixelProjection> project_points(const PointCloud& cloud, const CalibrationRig& rig);

/// Points whose projection lands inside the half-open image [0, W) x [0, H).
struct FovMask {
  std::vector<std::uint8_t> inside;
  std::vector<std::uint32_t> index_map;  // positions of inside points, increasing

  std::size_t size() const noexcept { return inside.size(); }
  std::size_t count() const noexcept { return index_map.size(); }
  bool operator[](std::size_t i) const noexcept { return inside[i] != 0; }

  static FovMask from_flags(std::vector<std::uint8_t> flags);
  static FovMask all(std::size_t n);
};

bool in_image(const PixelProjection& p, ImageSize image) noexcept;
FovMask fov_mask(const PointCloud& cloud, const CalibrationRig& rig);

/// Keeps points where the mask is set, in original order.
struct SlicedCloud {
  PointCloud cloud;
  std::vector<std::uint32_t> index_map;
};

SlicedCloud slice_cloud(const PointCloud& cloud, const FovMask& mask);

template <typename T>
std::vector<T> slice_values(const std::vector<T>& values, const FovMask& mask);

/// Writes `sliced[k]` back to `full[index_map[k]]`; other entries untouched.
template <typename T>
void scatter_values(const std::vector<T>& sliced, const std::vector<std::uint32_t>& index_map,
                    std::vector<T>& full);

enum class Sampling { Nearest, Bilinear };

struct LiftResult {
  PerPointProbs probs;
  FovMask mask;
};

/// `prob_map` is an H x W x C float32 tensor whose (H, W) match the rig.
/// In-FOV points receive the probability row of the pixel they project into
/// (Nearest: pixel floor(v), floor(u)); out-of-FOV rows are masked.
LiftResult lift_probs(const Tensor& prob_map, const PointCloud& cloud, const CalibrationRig& rig,
                      Sampling sampling = Sampling::Nearest);

/// Merges lifts from several cameras of one scan: each point's row is the
/// mean of the rows from cameras that see it; the mask is their union.
LiftResult merge_camera_lifts(const std::vector<LiftResult>& lifts);

// ---------------------------------------------------------------------------

template <typename T>
std::vector<T> slice_values(const std::vector<T>& values, const FovMask& mask) {
  std::vector<T> out;
  out.reserve(mask.count());
  for (auto i : mask.index_map) out.push_back(values[i]);
  return out;
}

template <typename T>
void scatter_values(const std::vector<T>& sliced, const std::vector<std::uint32_t>& index_map,
                    std::vector<T>& full) {
  for (std::size_t k = 0; k < index_map.size(); ++k) full[index_map[k]] = sliced[k];
}

}  // namespace lidarlift
