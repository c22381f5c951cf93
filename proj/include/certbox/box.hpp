#pragma once

#include <cmath>
#include <optional>

#include "certbox/errors.hpp"

namespace certbox {

/// Axis-aligned box [z0, z1, z2, z3] with bottom-left corner (z0, z1) and
/// upper-right corner (z2, z3). x grows right, y grows up.
///
/// Corner ordering (z0 <= z2, z1 <= z3) and finiteness are enforced here.
/// Nonnegativity of coordinates is an image-space property checked where
/// image semantics apply (ground truths, dataset entries); intermediate
/// boxes produced by bound propagation may carry negative coordinates.
struct BBox {
    double z0;
    double z1;
    double z2;
    double z3;

    BBox(double z0_, double z1_, double z2_, double z3_) : z0(z0_), z1(z1_), z2(z2_), z3(z3_) {
        if (!(std::isfinite(z0) && std::isfinite(z1) && std::isfinite(z2) && std::isfinite(z3)))
            throw ValidationError("box coordinate is not finite");
        if (z0 > z2 || z1 > z3)
            throw ValidationError("box corners are not ordered (z0 <= z2, z1 <= z3 required)");
    }

    double width() const { return z2 - z0; }
    double height() const { return z3 - z1; }

    friend bool operator==(const BBox& a, const BBox& b) {
        return a.z0 == b.z0 && a.z1 == b.z1 && a.z2 == b.z2 && a.z3 == b.z3;
    }
};

inline double area(const BBox& b) {
    return (b.z2 - b.z0) * (b.z3 - b.z1);
}

/// The true object box attached to an image. Strictly positive area keeps
/// every IoU denominator positive; coordinates live in image space (>= 0).
struct GroundTruth {
    BBox box;

    explicit GroundTruth(const BBox& b) : box(b) {
        if (!(b.z0 < b.z2 && b.z1 < b.z3))
            throw ValidationError("ground truth box must have strictly positive area");
        if (b.z0 < 0.0 || b.z1 < 0.0)
            throw ValidationError("ground truth box must have nonnegative coordinates");
    }

    GroundTruth(double z0, double z1, double z2, double z3) : GroundTruth(BBox(z0, z1, z2, z3)) {}
};

/// Componentwise max of lower corners, min of upper corners. Empty (nullopt)
/// when the boxes do not meet; a shared edge yields a zero-area box.
inline std::optional<BBox> intersection(const BBox& b0, const BBox& b1) {
    const double x0 = std::max(b0.z0, b1.z0);
    const double y0 = std::max(b0.z1, b1.z1);
    const double x1 = std::min(b0.z2, b1.z2);
    const double y1 = std::min(b0.z3, b1.z3);
    if (x0 > x1 || y0 > y1)
        return std::nullopt;
    return BBox(x0, y0, x1, y1);
}

/// Intersection over union, in [0, 1]. The denominator is at least
/// area(gt) > 0, so the ratio is always defined.
inline double iou(const GroundTruth& gt, const BBox& b) {
    const auto inter = intersection(gt.box, b);
    if (!inter)
        return 0.0;
    const double ai = area(*inter);
    return ai / (area(gt.box) + area(b) - ai);
}

} // namespace certbox
