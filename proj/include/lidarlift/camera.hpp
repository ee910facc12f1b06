#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace lidarlift {

struct ImageSize {
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Pinhole camera attached to the LiDAR: `projection` is the 3x4 rectified
/// projection matrix (pixels), `sensor_to_camera` the 4x4 homogeneous rigid
/// transform from the LiDAR frame to the camera frame.
struct CalibrationRig {
  Eigen::Matrix<double, 3, 4> projection = Eigen::Matrix<double, 3, 4>::Zero();
  Eigen::Matrix4d sensor_to_camera = Eigen::Matrix4d::Identity();
  ImageSize image;

  /// Rotation block orthonormal with det +1 within `tolerance`, bottom row
  /// (0,0,0,1), finite entries, and a non-empty image.
  bool is_valid(double tolerance = 1e-6) const;

  /// f/cx/cy pinhole with camera axes aligned to the sensor axes.
  static CalibrationRig pinhole(double focal, double cx, double cy, ImageSize image);
};

}  // namespace lidarlift
