#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "lidarlift/camera.hpp"
#include "lidarlift/io.hpp"
#include "lidarlift/pointcloud.hpp"

namespace lidarlift::synth {

// Class ids of the built-in synthetic class map.
inline constexpr std::uint32_t kRoad = 1;
inline constexpr std::uint32_t kBuilding = 2;
inline constexpr std::uint32_t kCar = 3;
inline constexpr std::uint32_t kPole = 4;
inline constexpr std::uint32_t kPerson = 5;

/// unlabeled, road, building, car, pole, person.
ClassMap class_map();

struct GroundPlane {
  std::uint32_t cls = kRoad;
  double z = -1.73;         // sensor height below origin
  double half_extent = 50;  // square |x|, |y| <= half_extent
};

/// Axis-aligned box.
struct Box {
  std::uint32_t cls = kCar;
  std::array<double, 3> center{};
  std::array<double, 3> size{};
};

/// Vertical cylinder standing on `base_z`.
struct Cylinder {
  std::uint32_t cls = kPole;
  std::array<double, 2> center{};
  double base_z = 0.0;
  double radius = 0.0;
  double height = 0.0;
};

struct LidarModel {
  std::uint32_t beams = 32;
  double elevation_min_deg = -25.0;
  double elevation_max_deg = 5.0;
  double azimuth_resolution_deg = 0.4;
  double max_range = 80.0;
  double range_noise = 0.0;  // uniform ±, meters
};

/// Pinhole camera looking along sensor azimuth `yaw_deg`, centered at `offset`.
struct CameraModel {
  ImageSize image{1024, 384};
  double focal = 500.0;
  double yaw_deg = 0.0;
  std::array<double, 3> offset{0.0, 0.0, 0.0};
};

struct SceneSpec {
  std::uint64_t seed = 0;
  std::optional<GroundPlane> ground;
  std::vector<Box> boxes;
  std::vector<Cylinder> cylinders;
  LidarModel lidar;
  CameraModel camera;

  /// Throws DegenerateSpec on non-positive sizes, zero beams, bad image, ...
  void validate() const;
};

CalibrationRig camera_rig(const CameraModel& camera);

struct Scene {
  PointCloud cloud;
  Labels gt;
  CalibrationRig rig;
};

/// Ray-casts the LiDAR over the scene objects; bit-deterministic per spec.
Scene render_scene(const SceneSpec& spec);

/// Ground-truth class per pixel (row-major H x W): the class seen along each
/// pixel-center ray, overwritten where a LiDAR return projects into the pixel
/// by the nearest such return's class, so lifting an exact teacher
/// reproduces the point labels.
std::vector<std::uint32_t> render_label_image(const SceneSpec& spec, const Scene& scene);

struct TeacherNoise {
  double border_rate = 0.0;
  double body_rate = 0.0;
  std::uint32_t band_px = 2;
};

/// H x W x C float32 probability map. Pixels within `band_px` (Chebyshev) of
/// a class boundary are flipped toward the neighboring class with
/// probability `border_rate`; other pixels toward a random class with
/// probability `body_rate`. Corrupted pixels draw lower confidences. The
/// corruption draws are nested in the rates: a pixel corrupted at one rate
/// is corrupted at every higher rate for the same seed.
Tensor simulate_teacher(const SceneSpec& spec, const Scene& scene, const TeacherNoise& noise,
                        std::uint64_t seed);

/// Randomized street-like scene: road, buildings, cars, poles, persons.
SceneSpec random_scene_spec(std::uint64_t seed);

nlohmann::json to_json(const SceneSpec& spec);
/// Throws Parse on unknown keys or wrong types.
SceneSpec scene_spec_from_json(const nlohmann::json& j);

}  // namespace lidarlift::synth
