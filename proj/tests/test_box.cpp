#include <catch2/catch_amalgamated.hpp>

#include "certbox/box.hpp"
#include "certbox/rng.hpp"

using namespace certbox;

TEST_CASE("box construction enforces corner ordering") {
    CHECK_NOTHROW(BBox(1, 2, 3, 4));
    CHECK_NOTHROW(BBox(1, 2, 1, 2));  // degenerate point box
    CHECK_THROWS_AS(BBox(3, 0, 1, 2), ValidationError);
    CHECK_THROWS_AS(BBox(0, 3, 2, 1), ValidationError);
}

TEST_CASE("ground truth requires strictly positive area and image coordinates") {
    CHECK_NOTHROW(GroundTruth(0, 0, 2, 2));
    CHECK_THROWS_AS(GroundTruth(1, 1, 1, 3), ValidationError);
    CHECK_THROWS_AS(GroundTruth(BBox(-1, 0, 2, 2)), ValidationError);
}

TEST_CASE("areas of the worked example") {
    CHECK(area(BBox(3, 1, 6, 4)) == 9.0);
    CHECK(area(BBox(1, 3, 4, 5)) == 6.0);
    CHECK(area(BBox(2, 2, 2, 5)) == 0.0);
}

TEST_CASE("intersections") {
    const auto inter = intersection(BBox(3, 1, 6, 4), BBox(1, 3, 4, 5));
    REQUIRE(inter.has_value());
    CHECK(*inter == BBox(3, 3, 4, 4));
    CHECK(area(*inter) == 1.0);

    const BBox b(2, 3, 7, 9);
    CHECK(intersection(b, b) == b);

    CHECK_FALSE(intersection(BBox(0, 0, 1, 1), BBox(2, 2, 3, 3)).has_value());
}

TEST_CASE("iou of the worked example is exactly 1/14") {
    const GroundTruth gt(3, 1, 6, 4);
    CHECK_THAT(iou(gt, BBox(1, 3, 4, 5)), Catch::Matchers::WithinAbs(1.0 / 14.0, 1e-15));
    CHECK(iou(gt, BBox(3, 1, 6, 4)) == 1.0);
    CHECK(iou(GroundTruth(0, 0, 2, 2), BBox(5, 5, 6, 6)) == 0.0);
}

namespace {

BBox random_box(Rng& rng) {
    const double x0 = rng.uniform(0.0, 15.0);
    const double y0 = rng.uniform(0.0, 15.0);
    return BBox(x0, y0, x0 + rng.uniform(0.5, 10.0), y0 + rng.uniform(0.5, 10.0));
}

} // namespace

TEST_CASE("iou range, symmetry and intersection area bound", "[property]") {
    Rng rng(31);
    for (int trial = 0; trial < 5000; ++trial) {
        const BBox a = random_box(rng);
        const BBox b = random_box(rng);
        const double v = iou(GroundTruth(a), b);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(v == iou(GroundTruth(b), a));
        if (const auto inter = intersection(a, b))
            CHECK(area(*inter) <= std::min(area(a), area(b)) + 1e-12);
    }
}

TEST_CASE("iou is 1 exactly on identical boxes", "[property]") {
    Rng rng(32);
    for (int trial = 0; trial < 1000; ++trial) {
        const BBox a = random_box(rng);
        CHECK(iou(GroundTruth(a), a) == 1.0);
        const BBox shifted(a.z0 + 0.01, a.z1, a.z2 + 0.01, a.z3);
        CHECK(iou(GroundTruth(a), shifted) < 1.0);
    }
}
