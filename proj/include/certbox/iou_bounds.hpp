#pragma once

#include <algorithm>
#include <array>
#include <optional>

#include "certbox/box.hpp"
#include "certbox/interval.hpp"

namespace certbox {

/// Per-coordinate interval enclosure of every box a detector can output over
/// a perturbation domain. Lower corners and upper corners are each ordered
/// (z0.lo <= z2.lo, z0.hi <= z2.hi, same for y); collapsed configurations
/// (z2.lo <= z0.hi or z3.lo <= z1.hi) are permitted members of the type and
/// drive the IoU lower bound to 0.
struct BoxBounds {
    Interval z0;
    Interval z1;
    Interval z2;
    Interval z3;

    BoxBounds(const Interval& z0_, const Interval& z1_, const Interval& z2_, const Interval& z3_)
        : z0(z0_), z1(z1_), z2(z2_), z3(z3_) {
        if (z0.lo > z2.lo || z0.hi > z2.hi || z1.lo > z3.lo || z1.hi > z3.hi)
            throw ValidationError("box bounds corners are not ordered componentwise");
    }

    static BoxBounds point(const BBox& b) {
        return BoxBounds(Interval::point(b.z0), Interval::point(b.z1), Interval::point(b.z2),
                         Interval::point(b.z3));
    }

    /// Build from lower/upper corner arrays, as stored in external bounds
    /// files. Throws InvalidBounds instead of ValidationError so file-level
    /// callers can map the failure to a data error.
    static BoxBounds from_corners(const std::array<double, 4>& lower,
                                  const std::array<double, 4>& upper) {
        for (int i = 0; i < 4; ++i) {
            if (!(std::isfinite(lower[i]) && std::isfinite(upper[i])))
                throw InvalidBounds("bounds coordinate is not finite");
            if (lower[i] > upper[i])
                throw InvalidBounds("lower corner exceeds upper corner");
        }
        if (lower[0] > lower[2] || upper[0] > upper[2] || lower[1] > lower[3] ||
            upper[1] > upper[3])
            throw InvalidBounds("bounds corners are not ordered componentwise");
        return BoxBounds(Interval(lower[0], upper[0]), Interval(lower[1], upper[1]),
                         Interval(lower[2], upper[2]), Interval(lower[3], upper[3]));
    }

    const Interval& coord(int i) const {
        switch (i) {
        case 0: return z0;
        case 1: return z1;
        case 2: return z2;
        default: return z3;
        }
    }

    /// True when the set contains degenerate boxes of zero width or height.
    bool collapsed() const { return z2.lo <= z0.hi || z3.lo <= z1.hi; }

    bool contains(const BBox& b) const {
        return z0.contains(b.z0) && z1.contains(b.z1) && z2.contains(b.z2) && z3.contains(b.z3);
    }

    /// Componentwise interval inclusion.
    bool contains(const BoxBounds& other) const {
        return z0.contains(other.z0) && z1.contains(other.z1) && z2.contains(other.z2) &&
               z3.contains(other.z3);
    }

    friend bool operator==(const BoxBounds& a, const BoxBounds& b) {
        return a.z0 == b.z0 && a.z1 == b.z1 && a.z2 == b.z2 && a.z3 == b.z3;
    }
};

enum class BoundMethod { Vanilla, Optimal };

struct IoUBounds {
    double lo;
    double hi;
    BoundMethod method;

    IoUBounds(double lo_, double hi_, BoundMethod m) : lo(lo_), hi(hi_), method(m) {
        if (!(0.0 <= lo && lo <= hi && hi <= 1.0))
            throw ValidationError("IoU bounds must satisfy 0 <= lo <= hi <= 1");
    }
};

/// Sound IoU enclosure by composing interval versions of IoU's primitive
/// operators: area bounds of the box set, interval intersection against the
/// degenerate ground-truth intervals, then the bound quotients. Both
/// endpoints are clamped into [0, 1]; a non-positive upper-bound denominator
/// (possible only in pathological clamped cases) is absorbed as hi = 1.
inline IoUBounds vanilla_bounds(const GroundTruth& gt, const BoxBounds& bb) {
    const BBox& g = gt.box;
    const Interval box_area = mul_nonneg(sub(bb.z2, bb.z0), sub(bb.z3, bb.z1));

    const Interval i0 = imax(bb.z0, Interval::point(g.z0));
    const Interval i1 = imax(bb.z1, Interval::point(g.z1));
    const Interval i2 = imin(bb.z2, Interval::point(g.z2));
    const Interval i3 = imin(bb.z3, Interval::point(g.z3));
    const Interval inter_area = mul_nonneg(sub(i2, i0), sub(i3, i1));

    const double gt_area = area(g);

    const double lo_den = box_area.hi + gt_area - inter_area.lo;
    double lo = lo_den > 0.0 ? inter_area.lo / lo_den : 0.0;

    const double hi_den = box_area.lo + gt_area - inter_area.hi;
    double hi = hi_den > 0.0 ? inter_area.hi / hi_den : 1.0;

    lo = std::clamp(lo, 0.0, 1.0);
    hi = std::clamp(hi, 0.0, 1.0);
    return IoUBounds(lo, hi, BoundMethod::Vanilla);
}

/// The box in bb with the highest IoU: each coordinate is the ground-truth
/// coordinate clamped into its interval. Well-formed for every BoxBounds,
/// collapsed ones included.
inline BBox projection_box(const GroundTruth& gt, const BoxBounds& bb) {
    const BBox& g = gt.box;
    return BBox(std::clamp(g.z0, bb.z0.lo, bb.z0.hi), std::clamp(g.z1, bb.z1.lo, bb.z1.hi),
                std::clamp(g.z2, bb.z2.lo, bb.z2.hi), std::clamp(g.z3, bb.z3.lo, bb.z3.hi));
}

struct UpperIoU {
    double value;
    BBox maximizer;
};

/// Exact maximum of IoU over bb, attained at the projection box.
inline UpperIoU optimal_upper(const GroundTruth& gt, const BoxBounds& bb) {
    const BBox best = projection_box(gt, bb);
    return {iou(gt, best), best};
}

/// Vertex set used for the exact lower bound. The coordinatewise sign of the
/// IoU derivative makes the minimizer a vertex of the input domain, but which
/// vertex depends on all coordinates jointly, so only full enumeration of the
/// 2^4 vertices is provably exact. ExtremesOnly restricts to the two corner
/// boxes {lower, upper} and exists to probe whether that cheaper variant is
/// ever looser.
enum class VertexPolicy { AllVertices, ExtremesOnly };

struct LowerIoU {
    double value;
    /// Minimizing vertex; nullopt when the set is collapsed (the infimum 0 is
    /// approached by degenerate boxes rather than attained at a vertex).
    std::optional<BBox> minimizer;

    bool collapsed() const { return !minimizer.has_value(); }
};

/// Exact minimum of IoU over bb: 0 for collapsed sets, otherwise the minimum
/// over the vertex boxes selected by the policy.
inline LowerIoU optimal_lower(const GroundTruth& gt, const BoxBounds& bb,
                              VertexPolicy policy = VertexPolicy::AllVertices) {
    if (bb.collapsed())
        return {0.0, std::nullopt};

    double best = 2.0;
    std::optional<BBox> argmin;
    auto consider = [&](double a, double b, double c, double d) {
        const BBox candidate(a, b, c, d);
        const double v = iou(gt, candidate);
        if (v < best) {
            best = v;
            argmin = candidate;
        }
    };

    if (policy == VertexPolicy::ExtremesOnly) {
        consider(bb.z0.lo, bb.z1.lo, bb.z2.lo, bb.z3.lo);
        consider(bb.z0.hi, bb.z1.hi, bb.z2.hi, bb.z3.hi);
    } else {
        for (int mask = 0; mask < 16; ++mask) {
            const double a = (mask & 1) ? bb.z0.hi : bb.z0.lo;
            const double b = (mask & 2) ? bb.z1.hi : bb.z1.lo;
            const double c = (mask & 4) ? bb.z2.hi : bb.z2.lo;
            const double d = (mask & 8) ? bb.z3.hi : bb.z3.lo;
            consider(a, b, c, d);
        }
    }
    return {best, argmin};
}

/// Exact IoU range over bb; both endpoints are attained (the lower one by a
/// vertex or as the collapsed limit 0, the upper one by the projection box).
inline IoUBounds optimal_bounds(const GroundTruth& gt, const BoxBounds& bb) {
    const double lo = optimal_lower(gt, bb).value;
    const double hi = optimal_upper(gt, bb).value;
    return IoUBounds(lo, hi, BoundMethod::Optimal);
}

/// Closed-form partial derivatives of IoU with respect to the predicted box
/// coordinates. Nonzero only where the boxes overlap with positive area.
struct IoUGradient {
    double d0 = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double d3 = 0.0;
    bool overlap = false;
    /// Set when some coordinate sits exactly on a branch switch point; the
    /// reported value is the one-sided derivative of the branch whose
    /// condition holds with equality.
    bool nondifferentiable = false;
};

inline IoUGradient iou_gradient(const GroundTruth& gt, const BBox& b) {
    const BBox& g = gt.box;
    const double x_max = std::min(b.z2, g.z2);
    const double x_min = std::max(b.z0, g.z0);
    const double y_max = std::min(b.z3, g.z3);
    const double y_min = std::max(b.z1, g.z1);

    IoUGradient grad;
    grad.nondifferentiable = b.z0 == g.z0 || b.z1 == g.z1 || b.z2 == g.z2 || b.z3 == g.z3;
    if (!(x_max > x_min && y_max > y_min))
        return grad;  // IoU is locally the constant 0
    grad.overlap = true;

    const double gt_area = area(g);
    const double inter_area = (x_max - x_min) * (y_max - y_min);
    const double den = gt_area + area(b) - inter_area;
    const double den_sq = den * den;
    const double bw = b.z2 - b.z0;
    const double bh = b.z3 - b.z1;

    // k = 0, 2: prefactor (y_max - y_min)/den^2, c_0 = +1, c_2 = -1.
    auto horizontal = [&](double ck, double zk, double gk) {
        double inner;
        if (ck * zk <= ck * gk)
            inner = ck * bh * (x_max - x_min);
        else
            inner = -ck * gt_area + ck * bh * (x_max - b.z2 + b.z0 - x_min);
        return (y_max - y_min) / den_sq * inner;
    };
    // k = 1, 3: prefactor (x_max - x_min)/den^2, c_1 = +1, c_3 = -1.
    auto vertical = [&](double ck, double zk, double gk) {
        double inner;
        if (ck * zk <= ck * gk)
            inner = ck * bw * (y_max - y_min);
        else
            inner = -ck * gt_area + ck * bw * (y_max - b.z3 + b.z1 - y_min);
        return (x_max - x_min) / den_sq * inner;
    };

    grad.d0 = horizontal(+1.0, b.z0, g.z0);
    grad.d2 = horizontal(-1.0, b.z2, g.z2);
    grad.d1 = vertical(+1.0, b.z1, g.z1);
    grad.d3 = vertical(-1.0, b.z3, g.z3);
    return grad;
}

} // namespace certbox
