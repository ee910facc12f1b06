#include <doctest.h>

#include "lidarlift/error.hpp"
#include "lidarlift/evaluation.hpp"
#include "lidarlift/rng.hpp"

using namespace lidarlift;

namespace {

constexpr std::uint32_t A = 1;
constexpr std::uint32_t B = 2;

}  // namespace

TEST_CASE("hand-computed confusion example") {
  const auto m = lidarlift::accumulate({A, A, B}, {A, B, B}, 3);
  CHECK(m.at(A, A) == 1);
  CHECK(m.at(A, B) == 1);
  CHECK(m.at(B, B) == 1);
  CHECK(m.total() == 3);
  const auto r = iou(m);
  CHECK(*r.per_class[A] == 0.5);
  CHECK(*r.per_class[B] == 0.5);
  CHECK(r.miou == 0.5);
  CHECK_FALSE(r.per_class[0].has_value());
}

TEST_CASE("all-A prediction on a half-and-half scene") {
  const auto r = iou(lidarlift::accumulate({A, A, B, B}, {A, A, A, A}, 3));
  CHECK(*r.per_class[A] == 0.5);
  CHECK(*r.per_class[B] == 0.0);
  CHECK(r.miou == 0.25);
}

TEST_CASE("perfect prediction and absent classes") {
  const auto r = iou(lidarlift::accumulate({A, B, B, A}, {A, B, B, A}, 5));
  CHECK(r.miou == 1.0);
  CHECK_FALSE(r.per_class[3].has_value());
  CHECK_FALSE(r.per_class[4].has_value());
}

TEST_CASE("ignore ground truth is skipped and ignore predictions are misses") {
  const auto m = lidarlift::accumulate({0, A, A}, {A, A, 0}, 3);
  CHECK(m.total() == 2);
  CHECK(m.at(A, 0) == 1);
  CHECK(*iou(m).per_class[A] == 0.5);
}

TEST_CASE("masks restrict evaluation") {
  const auto mask = FovMask::from_flags({1, 0, 1});
  const auto m = lidarlift::accumulate({A, A, B}, {A, B, B}, 3, &mask);
  CHECK(iou(m).miou == 1.0);
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(iou(ConfusionMatrix(3)), Error);
  try {
    iou(lidarlift::accumulate({0, 0}, {A, B}, 3));
    FAIL("expected EmptyMatrix");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyMatrix);
  }
  CHECK_THROWS_AS(lidarlift::accumulate({A}, {A, B}, 3), Error);
  CHECK_THROWS_AS(lidarlift::accumulate({A}, {7}, 3), Error);
  const auto mask = FovMask::all(4);
  CHECK_THROWS_AS(lidarlift::accumulate({A}, {A}, 3, &mask), Error);
}

TEST_CASE("corpus IoU sums matrices before dividing") {
  // Scan 1: 1 A point predicted right. Scan 2: 1 A point right and 2 wrong.
  // Per scan IoU_A: 1 and 1/3, mean 2/3. Pooled: 2 / 4 = 0.5.
  const auto s1 = lidarlift::accumulate({A}, {A}, 3);
  const auto s2 = lidarlift::accumulate({A, A, A}, {A, B, B}, 3);
  const auto rep = report({s1, s2});
  CHECK(*rep.result.per_class[A] == 0.5);
  CHECK(*iou(s1).per_class[A] == 1.0);
  CHECK(*iou(s2).per_class[A] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("matrix merge is associative and duplication leaves IoU unchanged") {
  Rng rng(3);
  auto random_matrix = [&] {
    Labels gt(100);
    Labels pred(100);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      gt[i] = static_cast<std::uint32_t>(rng.below(4));
      pred[i] = static_cast<std::uint32_t>(rng.below(4));
    }
    return lidarlift::accumulate(gt, pred, 4);
  };
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_matrix();
    const auto b = random_matrix();
    const auto c = random_matrix();
    auto left = a;
    left += b;
    left += c;
    auto bc = b;
    bc += c;
    auto right = a;
    right += bc;
    CHECK(left == right);
    const auto once = report(std::vector<ConfusionMatrix>{a, b});
    const auto twice = report(std::vector<ConfusionMatrix>{a, b, a, b});
    CHECK(once.result.miou == doctest::Approx(twice.result.miou).epsilon(1e-15));
  }
}

TEST_CASE("report csv layout") {
  ClassMap classes{{"unlabeled", "road", "car"}};
  const auto rep = report({lidarlift::accumulate({A, A, B}, {A, B, B}, 3)}, {ReductionStats{1, 4}});
  const auto csv = rep.csv(classes);
  CHECK(csv.find("class_id,name,iou\n") == 0);
  CHECK(csv.find("1,road,0.5\n") != std::string::npos);
  CHECK(csv.find("mIoU,0.5\n") != std::string::npos);
  CHECK(csv.find("point_reduction,0.25\n") != std::string::npos);
  CHECK(rep.text(classes).find("road") != std::string::npos);
}

TEST_CASE("pooled reduction weights scans by labeled count") {
  ReductionStats total;
  total += ReductionStats{1, 2};
  total += ReductionStats{0, 8};
  CHECK(total.fraction() == 0.1);
  CHECK(ReductionStats{}.fraction() == 0.0);
}
