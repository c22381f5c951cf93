#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "certbox/iou_bounds.hpp"
#include "certbox/oracle.hpp"
#include "certbox/rng.hpp"

using namespace certbox;
using Catch::Matchers::WithinAbs;

TEST_CASE("box bounds invariants") {
    CHECK_NOTHROW(BoxBounds(Interval(0, 1), Interval(0, 0), Interval(2, 2), Interval(2, 2)));
    // collapsed configurations are members of the type
    CHECK(BoxBounds(Interval(0, 3), Interval(0, 0), Interval(2, 5), Interval(2, 2)).collapsed());
    CHECK_THROWS_AS(BoxBounds(Interval(3, 4), Interval(0, 0), Interval(2, 5), Interval(2, 2)),
                    ValidationError);
    CHECK_THROWS_AS(BoxBounds::from_corners({0, 0, 2, 2}, {1, 0, 1.5, 2}), InvalidBounds);
    CHECK_THROWS_AS(BoxBounds::from_corners({3, 0, 2, 2}, {3, 0, 2.5, 2}), InvalidBounds);
}

TEST_CASE("vanilla bounds on point intervals reproduce the exact IoU") {
    const GroundTruth gt(3, 1, 6, 4);
    const IoUBounds b = vanilla_bounds(gt, BoxBounds::point(BBox(1, 3, 4, 5)));
    CHECK_THAT(b.lo, WithinAbs(1.0 / 14.0, 1e-15));
    CHECK_THAT(b.hi, WithinAbs(1.0 / 14.0, 1e-15));

    const IoUBounds exact = vanilla_bounds(gt, BoxBounds::point(BBox(3, 1, 6, 4)));
    CHECK(exact.lo == 1.0);
    CHECK(exact.hi == 1.0);
}

TEST_CASE("vanilla over-approximates the hand-checkable sliding box") {
    // gt = [0,0,2,2], z0 in [0,1], remaining coordinates fixed; the true IoU
    // range along z0 = t is (4-2t)/4, i.e. [0.5, 1]. Vanilla yields [1/3, 1]
    // (raw upper 2, clamped).
    const GroundTruth gt(0, 0, 2, 2);
    const BoxBounds bb(Interval(0, 1), Interval(0, 0), Interval(2, 2), Interval(2, 2));
    const IoUBounds v = vanilla_bounds(gt, bb);
    CHECK_THAT(v.lo, WithinAbs(1.0 / 3.0, 1e-15));
    CHECK(v.hi == 1.0);

    const IoUBounds o = optimal_bounds(gt, bb);
    CHECK_THAT(o.lo, WithinAbs(0.5, 1e-15));
    CHECK(o.hi == 1.0);
}

TEST_CASE("optimal upper projects the ground truth into the intervals") {
    SECTION("ground truth inside the set gives IoU 1") {
        const GroundTruth gt(3, 1, 6, 4);
        const BoxBounds bb(Interval(2, 4), Interval(0, 2), Interval(5, 7), Interval(3, 5));
        const UpperIoU up = optimal_upper(gt, bb);
        CHECK(up.value == 1.0);
        CHECK(up.maximizer == gt.box);
    }
    SECTION("figure-2 configuration") {
        const GroundTruth gt(3, 1, 6, 4);
        const BoxBounds bb(Interval(0, 1), Interval(3, 3), Interval(4, 4), Interval(5, 5));
        const UpperIoU up = optimal_upper(gt, bb);
        CHECK_THAT(up.value, WithinAbs(1.0 / 14.0, 1e-15));
        CHECK(up.maximizer == BBox(1, 3, 4, 5));
    }
    SECTION("sliding box") {
        const GroundTruth gt(0, 0, 2, 2);
        const BoxBounds bb(Interval(0, 1), Interval(0, 0), Interval(2, 2), Interval(2, 2));
        const UpperIoU up = optimal_upper(gt, bb);
        CHECK(up.value == 1.0);
        CHECK(up.maximizer == BBox(0, 0, 2, 2));
    }
}

TEST_CASE("optimal lower enumerates vertices and detects collapse") {
    SECTION("collapsed set saturates to zero") {
        const BoxBounds bb(Interval(0, 3), Interval(0, 1), Interval(2, 5), Interval(3, 4));
        const LowerIoU lo = optimal_lower(GroundTruth(0, 0, 2, 2), bb);
        CHECK(lo.value == 0.0);
        CHECK(lo.collapsed());
    }
    SECTION("sliding box minimizes at the far vertex") {
        const GroundTruth gt(0, 0, 2, 2);
        const BoxBounds bb(Interval(0, 1), Interval(0, 0), Interval(2, 2), Interval(2, 2));
        const LowerIoU lo = optimal_lower(gt, bb);
        CHECK_THAT(lo.value, WithinAbs(0.5, 1e-15));
        REQUIRE(lo.minimizer.has_value());
        CHECK(*lo.minimizer == BBox(1, 0, 2, 2));
    }
    SECTION("point interval returns the box itself") {
        const GroundTruth gt(3, 1, 6, 4);
        const BBox b(1, 3, 4, 5);
        const LowerIoU lo = optimal_lower(gt, BoxBounds::point(b));
        CHECK_THAT(lo.value, WithinAbs(1.0 / 14.0, 1e-15));
        REQUIRE(lo.minimizer.has_value());
        CHECK(*lo.minimizer == b);
    }
}

TEST_CASE("collapsed set containing the ground truth spans [0, 1]") {
    const GroundTruth gt(2, 2, 4, 4);
    const BoxBounds bb(Interval(0, 5), Interval(0, 5), Interval(3, 8), Interval(3, 8));
    REQUIRE(bb.collapsed());
    const IoUBounds o = optimal_bounds(gt, bb);
    CHECK(o.lo == 0.0);
    CHECK(o.hi == 1.0);
}

namespace {

double finite_difference(const GroundTruth& gt, const BBox& b, int coord, double h) {
    auto shifted = [&](double delta) {
        switch (coord) {
        case 0: return iou(gt, BBox(b.z0 + delta, b.z1, b.z2, b.z3));
        case 1: return iou(gt, BBox(b.z0, b.z1 + delta, b.z2, b.z3));
        case 2: return iou(gt, BBox(b.z0, b.z1, b.z2 + delta, b.z3));
        default: return iou(gt, BBox(b.z0, b.z1, b.z2, b.z3 + delta));
        }
    };
    return (shifted(h) - shifted(-h)) / (2.0 * h);
}

} // namespace

TEST_CASE("gradient worked examples") {
    const GroundTruth gt(0, 0, 2, 2);

    SECTION("sliding box slope is -1/2") {
        const IoUGradient g = iou_gradient(gt, BBox(1, 0, 2, 2));
        CHECK(g.overlap);
        CHECK_THAT(g.d0, WithinAbs(-0.5, 1e-12));
        CHECK_THAT(finite_difference(gt, BBox(1, 0, 2, 2), 0, 1e-6), WithinAbs(g.d0, 1e-8));
    }
    SECTION("left of the ground truth the slope is positive") {
        // IoU(z0 = t) = 4/(4 - 2t + 4 - 4) for t < 0, so d/dt at t = -1 is
        // 8/(4 - 2t)^2 = 2/9; confirmed by the finite-difference oracle.
        const BBox b(-1, 0, 2, 2);
        const IoUGradient g = iou_gradient(gt, b);
        CHECK(g.overlap);
        CHECK_THAT(g.d0, WithinAbs(2.0 / 9.0, 1e-12));
        CHECK_THAT(finite_difference(gt, b, 0, 1e-6), WithinAbs(g.d0, 1e-8));
    }
    SECTION("disjoint boxes have a zero gradient") {
        const IoUGradient g = iou_gradient(gt, BBox(5, 5, 6, 6));
        CHECK_FALSE(g.overlap);
        CHECK(g.d0 == 0.0);
        CHECK(g.d1 == 0.0);
        CHECK(g.d2 == 0.0);
        CHECK(g.d3 == 0.0);
    }
    SECTION("branch switch points are flagged") {
        const IoUGradient g = iou_gradient(gt, BBox(0, 0.5, 1.5, 1.5));
        CHECK(g.nondifferentiable);  // z0 == z0^gt
        CHECK(g.overlap);
    }
}

namespace {

struct GradientSample {
    GroundTruth gt;
    BBox b;
};

/// Overlapping configuration away from every branch switch point and with
/// every analytic component large enough for a 1e-5 relative comparison
/// against central differences (the finite-difference instrument floors out
/// near 1e-10 absolute).
GradientSample differentiable_sample(Rng& rng) {
    for (;;) {
        const double gx = rng.uniform(0.0, 10.0);
        const double gy = rng.uniform(0.0, 10.0);
        const double gw = rng.uniform(2.0, 8.0);
        const double gh = rng.uniform(2.0, 8.0);
        const GroundTruth gt(gx, gy, gx + gw, gy + gh);

        const double bx = gx + rng.uniform(-0.4, 0.4) * gw;
        const double by = gy + rng.uniform(-0.4, 0.4) * gh;
        const double bw = gw * rng.uniform(0.5, 1.5);
        const double bh = gh * rng.uniform(0.5, 1.5);
        const BBox b(bx, by, bx + bw, by + bh);

        const auto inter = intersection(gt.box, b);
        if (!inter || area(*inter) < 0.25)
            continue;
        const double margin = 1e-2;
        if (std::abs(b.z0 - gt.box.z0) < margin || std::abs(b.z1 - gt.box.z1) < margin ||
            std::abs(b.z2 - gt.box.z2) < margin || std::abs(b.z3 - gt.box.z3) < margin)
            continue;
        const IoUGradient g = iou_gradient(gt, b);
        const double floor = 1e-4;
        if (std::abs(g.d0) < floor || std::abs(g.d1) < floor || std::abs(g.d2) < floor ||
            std::abs(g.d3) < floor)
            continue;
        return {gt, b};
    }
}

} // namespace

TEST_CASE("gradient agrees with central finite differences", "[property]") {
    Rng rng(5150);
    const double h = 1e-6;
    for (int trial = 0; trial < 1000; ++trial) {
        const GradientSample s = differentiable_sample(rng);
        const IoUGradient g = iou_gradient(s.gt, s.b);
        REQUIRE(g.overlap);
        const double comps[4] = {g.d0, g.d1, g.d2, g.d3};
        for (int k = 0; k < 4; ++k) {
            const double fd = finite_difference(s.gt, s.b, k, h);
            const double rel = std::abs(fd - comps[k]) / std::abs(comps[k]);
            CHECK(rel <= 1e-5);
        }
    }
}

TEST_CASE("gradient sign structure around the ground truth", "[property]") {
    Rng rng(616);
    for (int trial = 0; trial < 1000; ++trial) {
        const GradientSample s = differentiable_sample(rng);
        const IoUGradient g = iou_gradient(s.gt, s.b);
        const double comps[4] = {g.d0, g.d1, g.d2, g.d3};
        const double bc[4] = {s.b.z0, s.b.z1, s.b.z2, s.b.z3};
        const double gc[4] = {s.gt.box.z0, s.gt.box.z1, s.gt.box.z2, s.gt.box.z3};
        for (int k = 0; k < 4; ++k) {
            if (bc[k] < gc[k])
                CHECK(comps[k] >= 0.0);
            else
                CHECK(comps[k] <= 0.0);
        }
    }
}

TEST_CASE("both methods are sound and optimal dominates vanilla", "[property]") {
    Rng sample_rng(8080);
    const auto instances = oracle::random_instances(1000, 4242);
    for (const oracle::Instance& inst : instances) {
        const IoUBounds v = vanilla_bounds(inst.gt, inst.bb);
        const IoUBounds o = optimal_bounds(inst.gt, inst.bb);

        CHECK(o.lo >= v.lo - 1e-12);
        CHECK(o.hi <= v.hi + 1e-12);

        for (int s = 0; s < 100; ++s) {
            const BBox b = oracle::sample_box(inst.bb, sample_rng);
            const double value = iou(inst.gt, b);
            CHECK(value >= v.lo - 1e-12);
            CHECK(value <= v.hi + 1e-12);
            CHECK(value >= o.lo - 1e-12);
            CHECK(value <= o.hi + 1e-12);
        }
    }
}

TEST_CASE("bounds are inclusion monotone", "[property]") {
    Rng rng(1212);
    const auto instances = oracle::random_instances(500, 77);
    for (const oracle::Instance& inst : instances) {
        const BoxBounds& bb = inst.bb;
        const BoxBounds wider(Interval(bb.z0.lo - rng.uniform(0.0, 1.0), bb.z0.hi),
                              Interval(bb.z1.lo - rng.uniform(0.0, 1.0), bb.z1.hi),
                              Interval(bb.z2.lo, bb.z2.hi + rng.uniform(0.0, 1.0)),
                              Interval(bb.z3.lo, bb.z3.hi + rng.uniform(0.0, 1.0)));
        REQUIRE(wider.contains(bb));

        const IoUBounds v_in = vanilla_bounds(inst.gt, bb);
        const IoUBounds v_out = vanilla_bounds(inst.gt, wider);
        CHECK(v_out.lo <= v_in.lo + 1e-12);
        CHECK(v_out.hi >= v_in.hi - 1e-12);

        const IoUBounds o_in = optimal_bounds(inst.gt, bb);
        const IoUBounds o_out = optimal_bounds(inst.gt, wider);
        CHECK(o_out.lo <= o_in.lo + 1e-12);
        CHECK(o_out.hi >= o_in.hi - 1e-12);
    }
}

TEST_CASE("point intervals make vanilla and optimal coincide", "[property]") {
    Rng rng(555);
    for (int trial = 0; trial < 1000; ++trial) {
        const double gx = rng.uniform(0.0, 10.0);
        const double gy = rng.uniform(0.0, 10.0);
        const GroundTruth gt(gx, gy, gx + rng.uniform(1.0, 6.0), gy + rng.uniform(1.0, 6.0));
        const double bx = rng.uniform(0.0, 14.0);
        const double by = rng.uniform(0.0, 14.0);
        const BBox b(bx, by, bx + rng.uniform(0.2, 6.0), by + rng.uniform(0.2, 6.0));

        const double exact = iou(gt, b);
        const IoUBounds v = vanilla_bounds(gt, BoxBounds::point(b));
        const IoUBounds o = optimal_bounds(gt, BoxBounds::point(b));
        CHECK_THAT(v.lo, WithinAbs(exact, 1e-12));
        CHECK_THAT(v.hi, WithinAbs(exact, 1e-12));
        CHECK_THAT(o.lo, WithinAbs(exact, 1e-12));
        CHECK_THAT(o.hi, WithinAbs(exact, 1e-12));
    }
}
