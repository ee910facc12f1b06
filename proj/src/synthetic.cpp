#include "lidarlift/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include <Eigen/Dense>

#include "lidarlift/error.hpp"
#include "lidarlift/projection.hpp"
#include "lidarlift/rng.hpp"

namespace lidarlift::synth {

namespace {

using Vec3 = Eigen::Vector3d;
constexpr double kEps = 1e-9;
constexpr double kDeg = std::numbers::pi / 180.0;

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  std::uint32_t cls = kIgnoreId;
};

void consider(Hit& best, double t, std::uint32_t cls) {
  if (t > kEps && t < best.t) best = {t, cls};
}

void intersect_ground(const GroundPlane& g, const Vec3& o, const Vec3& d, Hit& best) {
  if (std::abs(d.z()) < kEps) return;
  const double t = (g.z - o.z()) / d.z();
  if (t <= kEps) return;
  const Vec3 p = o + t * d;
  if (std::abs(p.x()) <= g.half_extent && std::abs(p.y()) <= g.half_extent) {
    consider(best, t, g.cls);
  }
}

void intersect_box(const Box& b, const Vec3& o, const Vec3& d, Hit& best) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double lo = b.center[a] - 0.5 * b.size[a];
    const double hi = b.center[a] + 0.5 * b.size[a];
    if (std::abs(d[a]) < kEps) {
      if (o[a] < lo || o[a] > hi) return;
      continue;
    }
    double t1 = (lo - o[a]) / d[a];
    double t2 = (hi - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
    if (t_near > t_far) return;
  }
  consider(best, t_near, b.cls);  // origins inside a box see nothing of it
}

void intersect_cylinder(const Cylinder& c, const Vec3& o, const Vec3& d, Hit& best) {
  const double ox = o.x() - c.center[0];
  const double oy = o.y() - c.center[1];
  const double top = c.base_z + c.height;
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > kEps) {
    const double b = 2.0 * (ox * d.x() + oy * d.y());
    const double cc = ox * ox + oy * oy - c.radius * c.radius;
    const double disc = b * b - 4.0 * a * cc;
    if (disc >= 0.0) {
      const double t = (-b - std::sqrt(disc)) / (2.0 * a);
      const double z = o.z() + t * d.z();
      if (z >= c.base_z && z <= top) consider(best, t, c.cls);
    }
  }
  if (std::abs(d.z()) > kEps) {
    for (double plane : {top, c.base_z}) {
      const double t = (plane - o.z()) / d.z();
      const double px = ox + t * d.x();
      const double py = oy + t * d.y();
      if (px * px + py * py <= c.radius * c.radius) consider(best, t, c.cls);
    }
  }
}

Hit cast_ray(const SceneSpec& spec, const Vec3& o, const Vec3& d, double max_range) {
  Hit best;
  if (spec.ground) intersect_ground(*spec.ground, o, d, best);
  for (const auto& b : spec.boxes) intersect_box(b, o, d, best);
  for (const auto& c : spec.cylinders) intersect_cylinder(c, o, d, best);
  if (best.t > max_range) return {};
  return best;
}

/// Sensor -> camera rotation for a camera looking along azimuth `yaw`.
Eigen::Matrix3d camera_rotation(double yaw_deg) {
  // Camera axes: x right, y down, z forward; sensor axes: x forward, y left, z up.
  Eigen::Matrix3d axes;
  axes << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  const double c = std::cos(-yaw_deg * kDeg);
  const double s = std::sin(-yaw_deg * kDeg);
  Eigen::Matrix3d undo_yaw;
  undo_yaw << c, -s, 0, s, c, 0, 0, 0, 1;
  return axes * undo_yaw;
}

double class_intensity(std::uint32_t cls) {
  switch (cls) {
    case kRoad: return 0.25;
    case kBuilding: return 0.45;
    case kCar: return 0.7;
    case kPole: return 0.55;
    case kPerson: return 0.35;
    default: return 0.1;
  }
}

double pixel_uniform(std::uint64_t seed, std::size_t pixel, std::uint64_t stream) {
  const std::uint64_t h = mix_seed(seed, static_cast<std::uint64_t>(pixel) * 4 + stream);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::DegenerateSpec, what);
}

}  // namespace

ClassMap class_map() { return ClassMap{{"unlabeled", "road", "building", "car", "pole", "person"}}; }

void SceneSpec::validate() const {
  const auto classes = class_map().size();
  auto valid_class = [&](std::uint32_t c) { return c != kIgnoreId && c < classes; };
  if (ground) {
    require(ground->half_extent > 0 && std::isfinite(ground->z), "ground plane extent must be > 0");
    require(valid_class(ground->cls), "ground plane class out of range");
  }
  for (const auto& b : boxes) {
    require(valid_class(b.cls), "box class out of range");
    for (int a = 0; a < 3; ++a) {
      require(b.size[a] > 0 && std::isfinite(b.center[a]), "box sizes must be positive");
    }
  }
  for (const auto& c : cylinders) {
    require(valid_class(c.cls), "cylinder class out of range");
    require(c.radius > 0 && c.height > 0 && std::isfinite(c.base_z),
            "cylinder radius and height must be positive");
  }
  require(lidar.beams >= 1, "beam count must be >= 1");
  require(lidar.azimuth_resolution_deg > 0 && lidar.azimuth_resolution_deg <= 360,
          "azimuth resolution must be in (0, 360]");
  require(lidar.elevation_min_deg <= lidar.elevation_max_deg &&
              lidar.elevation_min_deg > -90 && lidar.elevation_max_deg < 90,
          "elevation range must lie in (-90, 90)");
  require(lidar.max_range > 0 && lidar.range_noise >= 0, "ranges must be positive");
  require(camera.image.width > 0 && camera.image.height > 0 && camera.focal > 0,
          "camera image and focal length must be positive");
}

CalibrationRig camera_rig(const CameraModel& camera) {
  CalibrationRig rig = CalibrationRig::pinhole(camera.focal, 0.5 * camera.image.width,
                                               0.5 * camera.image.height, camera.image);
  const Eigen::Matrix3d r = camera_rotation(camera.yaw_deg);
  const Vec3 offset(camera.offset[0], camera.offset[1], camera.offset[2]);
  rig.sensor_to_camera.topLeftCorner<3, 3>() = r;
  rig.sensor_to_camera.topRightCorner<3, 1>() = -r * offset;
  return rig;
}

Scene render_scene(const SceneSpec& spec) {
  spec.validate();
  Scene scene;
  scene.rig = camera_rig(spec.camera);
  const auto& lidar = spec.lidar;
  const auto steps = static_cast<std::size_t>(std::llround(360.0 / lidar.azimuth_resolution_deg));
  Rng noise(spec.seed);
  const Vec3 origin = Vec3::Zero();

  for (std::uint32_t beam = 0; beam < lidar.beams; ++beam) {
    const double frac = lidar.beams == 1 ? 0.0 : static_cast<double>(beam) / (lidar.beams - 1);
    const double elev =
        (lidar.elevation_min_deg + frac * (lidar.elevation_max_deg - lidar.elevation_min_deg)) *
        kDeg;
    for (std::size_t step = 0; step < steps; ++step) {
      const double az = static_cast<double>(step) * lidar.azimuth_resolution_deg * kDeg;
      const Vec3 dir(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az),
                     std::sin(elev));
      const double jitter = noise.uniform(-1.0, 1.0);
      const double shade = noise.uniform();
      const Hit hit = cast_ray(spec, origin, dir, lidar.max_range);
      if (hit.cls == kIgnoreId) continue;
      const double range = hit.t + lidar.range_noise * jitter;
      const Vec3 p = origin + range * dir;
      const double intensity = std::clamp(class_intensity(hit.cls) + 0.1 * shade, 0.0, 1.0);
      scene.cloud.points.push_back({static_cast<float>(p.x()), static_cast<float>(p.y()),
                                    static_cast<float>(p.z()), static_cast<float>(intensity)});
      scene.gt.push_back(hit.cls);
    }
  }
  return scene;
}

std::vector<std::uint32_t> render_label_image(const SceneSpec& spec, const Scene& scene) {
  const auto& rig = scene.rig;
  const std::size_t width = rig.image.width;
  const std::size_t height = rig.image.height;
  std::vector<std::uint32_t> image(width * height, kIgnoreId);

  const Eigen::Matrix3d r = rig.sensor_to_camera.topLeftCorner<3, 3>();
  const Vec3 origin(spec.camera.offset[0], spec.camera.offset[1], spec.camera.offset[2]);
  const double f = rig.projection(0, 0);
  const double cx = rig.projection(0, 2);
  const double cy = rig.projection(1, 2);
  const double max_range = 2.0 * spec.lidar.max_range;
  for (std::size_t row = 0; row < height; ++row) {
    for (std::size_t col = 0; col < width; ++col) {
      const Vec3 cam((static_cast<double>(col) + 0.5 - cx) / f,
                     (static_cast<double>(row) + 0.5 - cy) / f, 1.0);
      const Vec3 dir = (r.transpose() * cam).normalized();
      image[row * width + col] = cast_ray(spec, origin, dir, max_range).cls;
    }
  }

  const auto proj = project_points(scene.cloud, rig);
  std::vector<double> depth(width * height, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < proj.size(); ++i) {
    if (!in_image(proj[i], rig.image)) continue;
    const std::size_t px = static_cast<std::size_t>(proj[i].v) * width +
                           static_cast<std::size_t>(proj[i].u);
    if (proj[i].depth < depth[px]) {
      depth[px] = proj[i].depth;
      image[px] = scene.gt[i];
    }
  }
  return image;
}

Tensor simulate_teacher(const SceneSpec& spec, const Scene& scene, const TeacherNoise& noise,
                        std::uint64_t seed) {
  if (!(noise.border_rate >= 0 && noise.border_rate <= 1 && noise.body_rate >= 0 &&
        noise.body_rate <= 1)) {
    throw Error(ErrorKind::DegenerateSpec, "teacher error rates must lie in [0, 1]");
  }
  const auto labels = render_label_image(spec, scene);
  const std::size_t width = scene.rig.image.width;
  const std::size_t height = scene.rig.image.height;
  const std::size_t classes = class_map().size();
  std::vector<float> probs(width * height * classes, 0.0F);
  const auto band = static_cast<long>(noise.band_px);

  auto neighbor_class = [&](long row, long col) -> std::optional<std::uint32_t> {
    const auto own = labels[static_cast<std::size_t>(row) * width + static_cast<std::size_t>(col)];
    for (long radius = 1; radius <= band; ++radius) {
      for (long dy = -radius; dy <= radius; ++dy) {
        for (long dx = -radius; dx <= radius; ++dx) {
          if (std::max(std::abs(dx), std::abs(dy)) != radius) continue;
          const long r = row + dy;
          const long c = col + dx;
          if (r < 0 || c < 0 || r >= static_cast<long>(height) || c >= static_cast<long>(width)) {
            continue;
          }
          const auto other =
              labels[static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c)];
          if (other != own) return other;
        }
      }
    }
    return std::nullopt;
  };

  for (std::size_t row = 0; row < height; ++row) {
    for (std::size_t col = 0; col < width; ++col) {
      const std::size_t px = row * width + col;
      const std::uint32_t gt = labels[px];
      const double u_corrupt = pixel_uniform(seed, px, 0);
      const double u_conf = pixel_uniform(seed, px, 1);
      const double u_class = pixel_uniform(seed, px, 2);
      const auto neighbor = neighbor_class(static_cast<long>(row), static_cast<long>(col));

      std::uint32_t target = gt;
      std::optional<std::uint32_t> secondary;
      double confidence = 0.0;
      if (neighbor) {
        if (u_corrupt < noise.border_rate) {
          target = *neighbor;
          secondary = gt;
          confidence = 0.5 + 0.35 * u_conf;
        } else {
          secondary = *neighbor;
          confidence = 0.55 + 0.35 * u_conf;
        }
      } else if (u_corrupt < noise.body_rate) {
        // Random wrong class among the trainable ones.
        const std::size_t choices = gt == kIgnoreId ? classes - 1 : classes - 2;
        const auto pick = 1 + static_cast<std::uint32_t>(u_class * static_cast<double>(choices));
        target = gt != kIgnoreId && pick >= gt ? pick + 1 : pick;
        secondary = gt;
        confidence = 0.45 + 0.35 * u_conf;
      } else {
        confidence = 0.75 + 0.25 * u_conf;
      }

      float* dst = probs.data() + px * classes;
      double rest = 1.0 - confidence;
      if (secondary) {
        dst[*secondary] = static_cast<float>(0.7 * rest);
        rest *= 0.3;
      }
      const std::size_t others = secondary ? classes - 2 : classes - 1;
      for (std::size_t c = 0; c < classes; ++c) {
        if (c == target || (secondary && c == *secondary)) continue;
        dst[c] = static_cast<float>(rest / static_cast<double>(others));
      }
      dst[target] = static_cast<float>(confidence);
    }
  }
  return Tensor::from_f32({static_cast<std::uint32_t>(height), static_cast<std::uint32_t>(width),
                           static_cast<std::uint32_t>(classes)},
                          probs);
}

SceneSpec random_scene_spec(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xC0FFEE));
  SceneSpec spec;
  spec.seed = seed;
  spec.ground = GroundPlane{};
  const double ground_z = spec.ground->z;

  // Half of the movable objects are placed in front of the camera.
  auto place = [&](double reach, double lateral, bool front) {
    for (;;) {
      const double x = front ? rng.uniform(4.0, reach) : rng.uniform(-reach, reach);
      const double y = rng.uniform(-lateral, lateral);
      if (std::hypot(x, y) > 4.0) return std::array<double, 2>{x, y};
    }
  };

  for (int i = 0; i < 8; ++i) {
    const double side = i % 2 == 0 ? 1.0 : -1.0;
    const bool front = i < 4;
    Box b;
    b.cls = kBuilding;
    b.size = {rng.uniform(8, 20), rng.uniform(4, 8), rng.uniform(6, 15)};
    const double x = front ? rng.uniform(5, 45) : rng.uniform(-45, 45);
    b.center = {x, side * (rng.uniform(11, 16) + 0.5 * b.size[1]), ground_z + 0.5 * b.size[2]};
    spec.boxes.push_back(b);
  }
  for (int i = 0; i < 12; ++i) {
    const auto xy = place(30, 8, i % 2 == 0);
    Box b;
    b.cls = kCar;
    const double length = rng.uniform(3.8, 4.8);
    const double width = rng.uniform(1.7, 2.0);
    const bool along_x = rng.uniform() < 0.75;
    b.size = {along_x ? length : width, along_x ? width : length, rng.uniform(1.4, 1.7)};
    b.center = {xy[0], xy[1], ground_z + 0.5 * b.size[2]};
    spec.boxes.push_back(b);
  }
  for (int i = 0; i < 8; ++i) {
    const auto xy = place(35, 10, i % 2 == 0);
    spec.cylinders.push_back(
        {kPole, xy, ground_z, rng.uniform(0.12, 0.2), rng.uniform(4.0, 7.0)});
  }
  for (int i = 0; i < 8; ++i) {
    const auto xy = place(25, 9, i % 2 == 0);
    spec.cylinders.push_back(
        {kPerson, xy, ground_z, rng.uniform(0.25, 0.35), rng.uniform(1.6, 1.9)});
  }
  return spec;
}

// --- JSON ------------------------------------------------------------------

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw Error(ErrorKind::Parse, std::string(where) + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) {
      throw Error(ErrorKind::Parse, std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const char* where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string(where) + "." + key + ": " + e.what());
  }
}

}  // namespace

nlohmann::json to_json(const SceneSpec& spec) {
  json j;
  j["seed"] = spec.seed;
  if (spec.ground) {
    j["ground"] = {{"class", spec.ground->cls},
                   {"z", spec.ground->z},
                   {"half_extent", spec.ground->half_extent}};
  }
  j["boxes"] = json::array();
  for (const auto& b : spec.boxes) {
    j["boxes"].push_back({{"class", b.cls}, {"center", b.center}, {"size", b.size}});
  }
  j["cylinders"] = json::array();
  for (const auto& c : spec.cylinders) {
    j["cylinders"].push_back({{"class", c.cls},
                              {"center", c.center},
                              {"base_z", c.base_z},
                              {"radius", c.radius},
                              {"height", c.height}});
  }
  j["lidar"] = {{"beams", spec.lidar.beams},
                {"elevation_min_deg", spec.lidar.elevation_min_deg},
                {"elevation_max_deg", spec.lidar.elevation_max_deg},
                {"azimuth_resolution_deg", spec.lidar.azimuth_resolution_deg},
                {"max_range", spec.lidar.max_range},
                {"range_noise", spec.lidar.range_noise}};
  j["camera"] = {{"width", spec.camera.image.width},
                 {"height", spec.camera.image.height},
                 {"focal", spec.camera.focal},
                 {"yaw_deg", spec.camera.yaw_deg},
                 {"offset", spec.camera.offset}};
  return j;
}

SceneSpec scene_spec_from_json(const nlohmann::json& j) {
  check_keys(j, {"seed", "ground", "boxes", "cylinders", "lidar", "camera"}, "scene");
  SceneSpec spec;
  read(j, "seed", spec.seed, "scene");
  if (j.contains("ground") && !j["ground"].is_null()) {
    const auto& g = j["ground"];
    check_keys(g, {"class", "z", "half_extent"}, "ground");
    GroundPlane plane;
    read(g, "class", plane.cls, "ground");
    read(g, "z", plane.z, "ground");
    read(g, "half_extent", plane.half_extent, "ground");
    spec.ground = plane;
  }
  if (j.contains("boxes")) {
    if (!j["boxes"].is_array()) throw Error(ErrorKind::Parse, "scene.boxes: expected an array");
    for (const auto& b : j["boxes"]) {
      check_keys(b, {"class", "center", "size"}, "box");
      Box box;
      read(b, "class", box.cls, "box");
      read(b, "center", box.center, "box");
      read(b, "size", box.size, "box");
      spec.boxes.push_back(box);
    }
  }
  if (j.contains("cylinders")) {
    if (!j["cylinders"].is_array()) {
      throw Error(ErrorKind::Parse, "scene.cylinders: expected an array");
    }
    for (const auto& c : j["cylinders"]) {
      check_keys(c, {"class", "center", "base_z", "radius", "height"}, "cylinder");
      Cylinder cyl;
      read(c, "class", cyl.cls, "cylinder");
      read(c, "center", cyl.center, "cylinder");
      read(c, "base_z", cyl.base_z, "cylinder");
      read(c, "radius", cyl.radius, "cylinder");
      read(c, "height", cyl.height, "cylinder");
      spec.cylinders.push_back(cyl);
    }
  }
  if (j.contains("lidar")) {
    const auto& l = j["lidar"];
    check_keys(l, {"beams", "elevation_min_deg", "elevation_max_deg", "azimuth_resolution_deg",
                   "max_range", "range_noise"},
               "lidar");
    read(l, "beams", spec.lidar.beams, "lidar");
    read(l, "elevation_min_deg", spec.lidar.elevation_min_deg, "lidar");
    read(l, "elevation_max_deg", spec.lidar.elevation_max_deg, "lidar");
    read(l, "azimuth_resolution_deg", spec.lidar.azimuth_resolution_deg, "lidar");
    read(l, "max_range", spec.lidar.max_range, "lidar");
    read(l, "range_noise", spec.lidar.range_noise, "lidar");
  }
  if (j.contains("camera")) {
    const auto& c = j["camera"];
    check_keys(c, {"width", "height", "focal", "yaw_deg", "offset"}, "camera");
    read(c, "width", spec.camera.image.width, "camera");
    read(c, "height", spec.camera.image.height, "camera");
    read(c, "focal", spec.camera.focal, "camera");
    read(c, "yaw_deg", spec.camera.yaw_deg, "camera");
    read(c, "offset", spec.camera.offset, "camera");
  }
  return spec;
}

}  // namespace lidarlift::synth
