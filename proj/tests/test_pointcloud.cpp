#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lidarlift/pointcloud.hpp"
#include "lidarlift/rng.hpp"

using namespace lidarlift;

namespace {

PointCloud random_cloud(std::uint64_t seed, std::size_t n, double extent = 10.0) {
  Rng rng(seed);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.push_back({static_cast<float>(rng.uniform(-extent, extent)),
                        static_cast<float>(rng.uniform(-extent, extent)),
                        static_cast<float>(rng.uniform(-2.0, 2.0)),
                        static_cast<float>(rng.uniform())});
  }
  return c;
}

PointCloud one(float x, float y, float z, float i = 0.5F) {
  return PointCloud{{{x, y, z, i}}};
}

}  // namespace

TEST_CASE("apply_transform examples") {
  const auto cloud = random_cloud(1, 50);
  CHECK(apply_transform(cloud, RigidTransform::identity()) == cloud);

  const auto yawed = apply_transform(one(1, 0, 0), RigidTransform::yaw(std::numbers::pi));
  CHECK(yawed.points[0].x == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(std::abs(yawed.points[0].y) < 1e-6);

  const auto moved = apply_transform(one(0, 0, 0), RigidTransform::translation_only(0, 0, 5));
  CHECK(moved.points[0] == Point{0, 0, 5, 0.5F});
}

TEST_CASE("apply_transform then inverse restores the cloud") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 100);
    const auto t = RigidTransform::translation_only(rng.uniform(-5, 5), rng.uniform(-5, 5),
                                                    rng.uniform(-1, 1))
                       .compose(RigidTransform::yaw(rng.uniform(-3, 3)));
    REQUIRE(t.is_valid());
    const auto cloud = random_cloud(seed, 100);
    const auto back = apply_transform(apply_transform(cloud, t), t.inverse());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      CHECK(std::abs(back.points[i].x - cloud.points[i].x) < 1e-5);
      CHECK(std::abs(back.points[i].y - cloud.points[i].y) < 1e-5);
      CHECK(std::abs(back.points[i].z - cloud.points[i].z) < 1e-5);
      CHECK(back.points[i].intensity == cloud.points[i].intensity);
    }
  }
}

TEST_CASE("rigid transform validity") {
  CHECK(RigidTransform::identity().is_valid());
  CHECK(RigidTransform::yaw(0.3).is_valid());
  RigidTransform reflect;
  reflect.rotation = {-1, 0, 0, 0, 1, 0, 0, 0, 1};
  CHECK_FALSE(reflect.is_valid());
  RigidTransform scaled;
  scaled.rotation = {1.01, 0, 0, 0, 1, 0, 0, 0, 1};
  CHECK_FALSE(scaled.is_valid());
}

TEST_CASE("flip examples") {
  CHECK(flip(one(1, 2, 3), FlipAxis::X).points[0] == Point{-1, 2, 3, 0.5F});
  CHECK(flip(one(0, -4, 1), FlipAxis::Y).points[0] == Point{0, 4, 1, 0.5F});
  const auto cloud = random_cloud(7, 40);
  CHECK(flip(flip(cloud, FlipAxis::XY), FlipAxis::XY) == cloud);
}

TEST_CASE("yaw_rotate examples") {
  const auto cloud = random_cloud(3, 30);
  CHECK(yaw_rotate(cloud, 0.0) == cloud);
  const auto r = yaw_rotate(one(1, 0, 0), std::numbers::pi / 2);
  CHECK(std::abs(r.points[0].x) < 1e-6);
  CHECK(std::abs(r.points[0].y - 1.0) < 1e-6);
  CHECK(r.points[0].z == 0.0F);

  // Eight 40° steps add up to 320°, which is not the identity.
  auto acc = one(1, 0, 0);
  for (int k = 0; k < 8; ++k) acc = yaw_rotate(acc, 40.0 * std::numbers::pi / 180.0);
  CHECK(std::abs(acc.points[0].x - 1.0) > 0.1);
}

TEST_CASE("flip and yaw preserve xy distance to origin, count and intensity") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto cloud = random_cloud(seed, 200, 5.0);
    Rng rng(seed);
    const double angle = rng.uniform(-10, 10);
    for (const auto& out : {flip(cloud, FlipAxis::X), flip(cloud, FlipAxis::Y),
                            flip(cloud, FlipAxis::XY), yaw_rotate(cloud, angle)}) {
      REQUIRE(out.size() == cloud.size());
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto& a = cloud.points[i];
        const auto& b = out.points[i];
        CHECK(std::abs(std::hypot(double(a.x), double(a.y)) -
                       std::hypot(double(b.x), double(b.y))) < 1e-6);
        CHECK(a.z == b.z);
        CHECK(a.intensity == b.intensity);
      }
    }
  }
}

TEST_CASE("translate_jitter") {
  const auto cloud = random_cloud(11, 60);
  CHECK(translate_jitter(cloud, 5, 0.0) == cloud);
  CHECK(translate_jitter(cloud, 5, 0.5) == translate_jitter(cloud, 5, 0.5));
  CHECK_FALSE(translate_jitter(cloud, 5, 0.5) == translate_jitter(cloud, 6, 0.5));
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    for (double v : jitter_offset(seed, 0.5)) {
      CHECK(v >= -0.5);
      CHECK(v <= 0.5);
    }
  }
  // Single offset for the whole cloud.
  const auto moved = translate_jitter(cloud, 9, 1.0);
  const auto off = jitter_offset(9, 1.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(moved.points[i].x == static_cast<float>(cloud.points[i].x + off[0]));
  }
}

TEST_CASE("squeeze") {
  const auto cloud = random_cloud(12, 60);
  CHECK(squeeze(cloud, 1, {1.0, 1.0}) == cloud);
  CHECK(scale_xy(one(2, 4, 6), 0.5).points[0] == Point{1, 2, 6, 0.5F});
  CHECK(squeeze_factor(77, {}) == squeeze_factor(77, {}));
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const double f = squeeze_factor(seed, {0.9, 1.1});
    CHECK(f >= 0.9);
    CHECK(f <= 1.1);
  }
}

TEST_CASE("sector_mix with itself preserves the label multiset") {
  LabeledCloud a{random_cloud(4, 120), {}};
  Rng rng(4);
  for (std::size_t i = 0; i < a.cloud.size(); ++i) a.labels.push_back(1 + rng.below(5));
  const auto [x, y] = sector_mix(a, a, 99);
  auto sorted = [](Labels l) {
    std::sort(l.begin(), l.end());
    return l;
  };
  CHECK(sorted(x.labels) == sorted(a.labels));
  CHECK(sorted(y.labels) == sorted(a.labels));
}

TEST_CASE("sector_mix partitions the union of both inputs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    LabeledCloud a{random_cloud(seed, 80), Labels(80, 1)};
    LabeledCloud b{random_cloud(seed + 1000, 50), Labels(50, 2)};
    const auto sector = draw_sector(seed);
    CHECK(sector.width >= std::numbers::pi / 2);
    CHECK(sector.width <= std::numbers::pi);
    const auto [x, y] = sector_mix(a, b, sector);

    std::size_t a_in = 0;
    std::size_t b_in = 0;
    for (const auto& p : a.cloud.points) a_in += sector.contains(p);
    for (const auto& p : b.cloud.points) b_in += sector.contains(p);
    CHECK(x.cloud.size() == a.cloud.size() - a_in + b_in);
    CHECK(y.cloud.size() == b.cloud.size() - b_in + a_in);
    CHECK(x.labels.size() == x.cloud.size());

    auto key = [](const Point& p) { return std::tuple(p.x, p.y, p.z, p.intensity); };
    std::vector<std::tuple<float, float, float, float>> in, out;
    for (const auto* c : {&a.cloud, &b.cloud}) {
      for (const auto& p : c->points) in.push_back(key(p));
    }
    for (const auto* c : {&x.cloud, &y.cloud}) {
      for (const auto& p : c->points) out.push_back(key(p));
    }
    std::sort(in.begin(), in.end());
    std::sort(out.begin(), out.end());
    CHECK(in == out);
  }
}

TEST_CASE("sector_mix moves b's upper half-plane points into a") {
  // 10 points on a ring at 18 + 36k degrees; the sector [0, π) holds k = 0..4.
  LabeledCloud a;
  LabeledCloud b;
  for (int k = 0; k < 10; ++k) {
    const double az = (18.0 + k * 36.0) * std::numbers::pi / 180.0;
    a.cloud.points.push_back({static_cast<float>(2 * std::cos(az)),
                              static_cast<float>(2 * std::sin(az)), 0, 0.1F});
    a.labels.push_back(1);
    b.cloud.points.push_back({static_cast<float>(5 * std::cos(az)),
                              static_cast<float>(5 * std::sin(az)), 1, 0.9F});
    b.labels.push_back(2);
  }
  const Sector upper{0.0, std::numbers::pi};
  const auto [x, y] = sector_mix(a, b, upper);
  REQUIRE(x.cloud.size() == 10);
  // a keeps k = 5..9, then receives b's k = 0..4.
  for (int k = 0; k < 5; ++k) {
    CHECK(x.cloud.points[k] == a.cloud.points[5 + k]);
    CHECK(x.labels[k] == 1);
    CHECK(x.cloud.points[5 + k] == b.cloud.points[k]);
    CHECK(x.labels[5 + k] == 2);
    CHECK(y.cloud.points[5 + k] == a.cloud.points[k]);
  }
}

TEST_CASE("seeded ops are bit-deterministic") {
  const auto cloud = random_cloud(21, 100);
  LabeledCloud a{cloud, Labels(cloud.size(), 3)};
  LabeledCloud b{random_cloud(22, 70), Labels(70, 4)};
  const auto m1 = sector_mix(a, b, 5);
  const auto m2 = sector_mix(a, b, 5);
  CHECK(m1.first.cloud == m2.first.cloud);
  CHECK(m1.second.labels == m2.second.labels);
  CHECK(squeeze(cloud, 3) == squeeze(cloud, 3));
}

TEST_CASE("PerPointProbs argmax breaks ties toward the lowest class") {
  PerPointProbs p(3, 3);
  const float rows[] = {0.4F, 0.4F, 0.2F, 0.1F, 0.2F, 0.7F, 0, 0, 0};
  std::copy(std::begin(rows), std::end(rows), p.values.begin());
  p.masked = {0, 0, 1};
  CHECK(p.argmax_labels() == Labels{0, 2, kIgnoreId});
  const auto conf = p.max_confidence();
  CHECK(conf[0] == 0.4F);
  CHECK(conf[2] == 0.0F);
}

TEST_CASE("cloud validity flags non-finite values") {
  auto c = one(1, 2, 3);
  CHECK(c.valid());
  c.points[0].y = std::nanf("");
  CHECK_FALSE(c.valid());
}
