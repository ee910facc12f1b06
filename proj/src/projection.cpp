#include "lidarlift/projection.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "lidarlift/error.hpp"

namespace lidarlift {

bool CalibrationRig::is_valid(double tolerance) const {
  if (image.width == 0 || image.height == 0) return false;
  if (!projection.allFinite() || !sensor_to_camera.allFinite()) return false;
  if (sensor_to_camera(3, 0) != 0.0 || sensor_to_camera(3, 1) != 0.0 ||
      sensor_to_camera(3, 2) != 0.0 || sensor_to_camera(3, 3) != 1.0) {
    return false;
  }
  const Eigen::Matrix3d r = sensor_to_camera.topLeftCorner<3, 3>();
  if ((r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tolerance) {
    return false;
  }
  return std::abs(r.determinant() - 1.0) <= tolerance;
}

CalibrationRig CalibrationRig::pinhole(double focal, double cx, double cy, ImageSize image) {
  CalibrationRig rig;
  rig.projection << focal, 0, cx, 0, 0, focal, cy, 0, 0, 0, 1, 0;
  rig.image = image;
  return rig;
}

std::vector<PixelProjection> project_points(const PointCloud& cloud, const CalibrationRig& rig) {
  const Eigen::Matrix<double, 3, 4> chain = rig.projection * rig.sensor_to_camera;
  const Eigen::RowVector4d depth_row = rig.sensor_to_camera.row(2);
  std::vector<PixelProjection> out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const Eigen::Vector4d h(p.x, p.y, p.z, 1.0);
    const Eigen::Vector3d img = chain * h;
    auto& o = out[i];
    o.depth = depth_row.dot(h);
    o.valid = o.depth > 0.0 && img.z() > 0.0;
    if (img.z() != 0.0) {
      o.u = img.x() / img.z();
      o.v = img.y() / img.z();
    }
  }
  return out;
}

bool in_image(const PixelProjection& p, ImageSize image) noexcept {
  return p.valid && p.u >= 0.0 && p.u < static_cast<double>(image.width) && p.v >= 0.0 &&
         p.v < static_cast<double>(image.height);
}

FovMask FovMask::from_flags(std::vector<std::uint8_t> flags) {
  FovMask m;
  m.inside = std::move(flags);
  for (std::size_t i = 0; i < m.inside.size(); ++i) {
    if (m.inside[i] != 0) {
      m.inside[i] = 1;
      m.index_map.push_back(static_cast<std::uint32_t>(i));
    }
  }
  return m;
}

FovMask FovMask::all(std::size_t n) { return from_flags(std::vector<std::uint8_t>(n, 1)); }

FovMask fov_mask(const PointCloud& cloud, const CalibrationRig& rig) {
  const auto proj = project_points(cloud, rig);
  std::vector<std::uint8_t> flags(cloud.size(), 0);
  for (std::size_t i = 0; i < proj.size(); ++i) flags[i] = in_image(proj[i], rig.image) ? 1 : 0;
  return FovMask::from_flags(std::move(flags));
}

SlicedCloud slice_cloud(const PointCloud& cloud, const FovMask& mask) {
  if (mask.size() != cloud.size()) {
    throw Error(ErrorKind::SizeMismatch, "mask has " + std::to_string(mask.size()) +
                                             " entries for " + std::to_string(cloud.size()) +
                                             " points");
  }
  SlicedCloud out;
  out.index_map = mask.index_map;
  out.cloud.points = slice_values(cloud.points, mask);
  return out;
}

LiftResult lift_probs(const Tensor& prob_map, const PointCloud& cloud, const CalibrationRig& rig,
                      Sampling sampling) {
  if (prob_map.dtype != DType::Float32 || prob_map.dims.size() != 3) {
    throw Error(ErrorKind::DimMismatch, "probability map must be an H x W x C float32 tensor");
  }
  const std::size_t height = prob_map.dims[0];
  const std::size_t width = prob_map.dims[1];
  const std::size_t classes = prob_map.dims[2];
  if (width != rig.image.width || height != rig.image.height) {
    throw Error(ErrorKind::DimMismatch,
                "probability map is " + std::to_string(width) + "x" + std::to_string(height) +
                    " but the camera image is " + std::to_string(rig.image.width) + "x" +
                    std::to_string(rig.image.height));
  }
  if (classes == 0) throw Error(ErrorKind::DimMismatch, "probability map has zero classes");

  const auto pixels = prob_map.to_f32();
  const auto proj = project_points(cloud, rig);
  LiftResult result;
  result.probs = PerPointProbs(cloud.size(), classes);
  std::vector<std::uint8_t> flags(cloud.size(), 0);

  auto pixel = [&](std::size_t row, std::size_t col) {
    return pixels.data() + (row * width + col) * classes;
  };

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!in_image(proj[i], rig.image)) continue;
    flags[i] = 1;
    result.probs.masked[i] = 0;
    float* dst = result.probs.row(i);
    const double u = proj[i].u;
    const double v = proj[i].v;
    if (sampling == Sampling::Nearest) {
      const auto* src = pixel(static_cast<std::size_t>(v), static_cast<std::size_t>(u));
      std::copy(src, src + classes, dst);
      continue;
    }
    // Bilinear over pixel centers, clamped at the border; a convex
    // combination of normalized rows stays normalized.
    const double fu = std::clamp(u - 0.5, 0.0, static_cast<double>(width - 1));
    const double fv = std::clamp(v - 0.5, 0.0, static_cast<double>(height - 1));
    const auto c0 = static_cast<std::size_t>(fu);
    const auto r0 = static_cast<std::size_t>(fv);
    const std::size_t c1 = std::min(c0 + 1, width - 1);
    const std::size_t r1 = std::min(r0 + 1, height - 1);
    const double au = fu - static_cast<double>(c0);
    const double av = fv - static_cast<double>(r0);
    const float* p00 = pixel(r0, c0);
    const float* p01 = pixel(r0, c1);
    const float* p10 = pixel(r1, c0);
    const float* p11 = pixel(r1, c1);
    for (std::size_t c = 0; c < classes; ++c) {
      dst[c] = static_cast<float>((1 - av) * ((1 - au) * p00[c] + au * p01[c]) +
                                  av * ((1 - au) * p10[c] + au * p11[c]));
    }
  }
  result.mask = FovMask::from_flags(std::move(flags));
  return result;
}

LiftResult merge_camera_lifts(const std::vector<LiftResult>& lifts) {
  if (lifts.empty()) throw Error(ErrorKind::EmptyInput, "no camera lifts to merge");
  if (lifts.size() == 1) return lifts.front();
  const std::size_t n = lifts.front().probs.num_points;
  const std::size_t classes = lifts.front().probs.num_classes;
  for (const auto& l : lifts) {
    if (l.probs.num_points != n || l.probs.num_classes != classes) {
      throw Error(ErrorKind::DimMismatch, "camera lifts disagree on N x C");
    }
  }
  LiftResult out;
  out.probs = PerPointProbs(n, classes);
  std::vector<std::uint8_t> flags(n, 0);
  std::vector<double> acc(classes);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    int seen = 0;
    for (const auto& l : lifts) {
      if (l.probs.is_masked(i)) continue;
      ++seen;
      const float* r = l.probs.row(i);
      for (std::size_t c = 0; c < classes; ++c) acc[c] += r[c];
    }
    if (seen == 0) continue;
    flags[i] = 1;
    out.probs.masked[i] = 0;
    float* dst = out.probs.row(i);
    for (std::size_t c = 0; c < classes; ++c) dst[c] = static_cast<float>(acc[c] / seen);
  }
  out.mask = FovMask::from_flags(std::move(flags));
  return out;
}

}  // namespace lidarlift
