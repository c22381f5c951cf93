#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "certbox/box.hpp"
#include "certbox/iou_bounds.hpp"
#include "certbox/network.hpp"
#include "certbox/perturbation.hpp"
#include "certbox/rng.hpp"

// Brute-force references used to validate every bound computation. This
// module depends on the BoxBounds type and on the exact IoU only; the bound
// algorithms it checks are deliberately reimplemented here from scratch.

namespace certbox::oracle {

namespace detail {

/// A lattice combination with crossed corners stands for the degenerate
/// member of the set whose width or height saturates at zero.
inline BBox saturate(double z0, double z1, double z2, double z3) {
    return BBox(z0, z1, std::max(z0, z2), std::max(z1, z3));
}

/// Independent copy of the coordinatewise clamp that yields the highest-IoU
/// member of the set.
inline BBox project_gt(const GroundTruth& gt, const BoxBounds& bb) {
    return BBox(std::clamp(gt.box.z0, bb.z0.lo, bb.z0.hi),
                std::clamp(gt.box.z1, bb.z1.lo, bb.z1.hi),
                std::clamp(gt.box.z2, bb.z2.lo, bb.z2.hi),
                std::clamp(gt.box.z3, bb.z3.lo, bb.z3.hi));
}

} // namespace detail

struct IoURange {
    double min_iou;
    double max_iou;
};

struct IoURangeWitness {
    double min_iou;
    double max_iou;
    BBox argmin;
    BBox argmax;
};

/// Min/max IoU over the (divisions+1)^4 lattice of bb, augmented with the 16
/// vertices and the ground-truth projection box.
inline IoURange iou_range_grid(const GroundTruth& gt, const BoxBounds& bb,
                               std::size_t divisions) {
    if (divisions < 2)
        throw ValidationError("grid oracle requires divisions >= 2");

    std::array<std::vector<double>, 4> lattice;
    for (int i = 0; i < 4; ++i) {
        const Interval& iv = bb.coord(i);
        lattice[i].reserve(divisions + 1);
        for (std::size_t k = 0; k <= divisions; ++k)
            lattice[i].push_back(iv.lo + (iv.hi - iv.lo) *
                                             (static_cast<double>(k) / static_cast<double>(divisions)));
        lattice[i].back() = iv.hi;
        // vertices are lattice members, but add them explicitly in case of
        // floating-point drift in the interior points
        lattice[i].push_back(iv.lo);
        lattice[i].push_back(iv.hi);
    }

    double mn = 2.0;
    double mx = -1.0;
    for (double a : lattice[0])
        for (double b : lattice[1])
            for (double c : lattice[2])
                for (double d : lattice[3]) {
                    const double v = iou(gt, detail::saturate(a, b, c, d));
                    mn = std::min(mn, v);
                    mx = std::max(mx, v);
                }
    const double proj = iou(gt, detail::project_gt(gt, bb));
    mn = std::min(mn, proj);
    mx = std::max(mx, proj);
    return {mn, mx};
}

/// Min/max IoU over the 16 vertex boxes plus the projection box, with the
/// boxes attaining them.
inline IoURangeWitness iou_range_vertices(const GroundTruth& gt, const BoxBounds& bb) {
    const BBox proj = detail::project_gt(gt, bb);
    double mn = iou(gt, proj);
    double mx = mn;
    BBox argmin = proj;
    BBox argmax = proj;
    for (int mask = 0; mask < 16; ++mask) {
        const double a = (mask & 1) ? bb.z0.hi : bb.z0.lo;
        const double b = (mask & 2) ? bb.z1.hi : bb.z1.lo;
        const double c = (mask & 4) ? bb.z2.hi : bb.z2.lo;
        const double d = (mask & 8) ? bb.z3.hi : bb.z3.lo;
        const BBox vertex = detail::saturate(a, b, c, d);
        const double v = iou(gt, vertex);
        if (v < mn) {
            mn = v;
            argmin = vertex;
        }
        if (v > mx) {
            mx = v;
            argmax = vertex;
        }
    }
    return {mn, mx, argmin, argmax};
}

/// Uniform sample from the box set; crossed corners saturate to the
/// degenerate member they stand for.
inline BBox sample_box(const BoxBounds& bb, Rng& rng) {
    const double a = rng.uniform(bb.z0.lo, bb.z0.hi);
    const double b = rng.uniform(bb.z1.lo, bb.z1.hi);
    const double c = rng.uniform(bb.z2.lo, bb.z2.hi);
    const double d = rng.uniform(bb.z3.lo, bb.z3.hi);
    return detail::saturate(a, b, c, d);
}

/// One randomized (ground truth, box bounds) pair.
struct Instance {
    GroundTruth gt;
    BoxBounds bb;
};

/// Deterministic stream of instances cycling through qualitatively distinct
/// cases: point intervals, sets containing the ground truth, collapsed sets,
/// far-off sets and generic perturbed ones.
inline Instance random_instance(Rng& rng, std::size_t case_index) {
    const double gx0 = rng.uniform(0.0, 12.0);
    const double gy0 = rng.uniform(0.0, 12.0);
    const double gw = rng.uniform(1.0, 8.0);
    const double gh = rng.uniform(1.0, 8.0);
    const GroundTruth gt(gx0, gy0, gx0 + gw, gy0 + gh);

    // base predicted box, loosely correlated with the ground truth
    const double shift_scale = rng.uniform(0.0, 6.0);
    double b0 = gx0 + rng.uniform(-shift_scale, shift_scale);
    double b1 = gy0 + rng.uniform(-shift_scale, shift_scale);
    double b2 = b0 + rng.uniform(0.5, 10.0);
    double b3 = b1 + rng.uniform(0.5, 10.0);

    std::array<double, 4> lower{};
    std::array<double, 4> upper{};
    auto widen = [&](const std::array<double, 4>& base, double max_spread) {
        for (int i = 0; i < 4; ++i) {
            lower[i] = base[i] - rng.uniform(0.0, max_spread);
            upper[i] = base[i] + rng.uniform(0.0, max_spread);
        }
    };

    switch (case_index % 5) {
    case 0:  // point interval
        lower = upper = {b0, b1, b2, b3};
        break;
    case 1: {  // contains the ground truth
        const std::array<double, 4> g{gt.box.z0, gt.box.z1, gt.box.z2, gt.box.z3};
        widen(g, 2.5);
        break;
    }
    case 2:  // wide enough to collapse (usually)
        widen({b0, b1, b2, b3}, 8.0);
        break;
    case 3:  // far from the ground truth, often disjoint
        b0 += 20.0;
        b2 += 20.0;
        widen({b0, b1, b2, b3}, 2.0);
        break;
    default:  // generic moderate spread
        widen({b0, b1, b2, b3}, 2.0);
        break;
    }

    // restore componentwise corner ordering by widening outward only, which
    // keeps whatever the case placed inside the set inside it
    lower[0] = std::min(lower[0], lower[2]);
    lower[1] = std::min(lower[1], lower[3]);
    upper[2] = std::max(upper[2], upper[0]);
    upper[3] = std::max(upper[3], upper[1]);

    return {gt, BoxBounds(Interval(lower[0], upper[0]), Interval(lower[1], upper[1]),
                          Interval(lower[2], upper[2]), Interval(lower[3], upper[3]))};
}

inline std::vector<Instance> random_instances(std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Instance> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(random_instance(rng, i));
    return out;
}

/// IBP soundness probe: sampled forward passes must stay inside the
/// propagated output intervals.
struct BoundCheck {
    std::size_t samples = 0;
    std::size_t violations = 0;
    double max_escape = 0.0;
};

inline BoundCheck network_bound_check(const Network& net, const PerturbationSpec& spec,
                                      const ImageTensor& s0, std::size_t samples,
                                      std::uint64_t seed) {
    if (samples < 1)
        throw ValidationError("bound check requires at least one sample");
    // raw intervals: forward outputs are guaranteed inside these; the
    // corner-ordering repair applies to the box set, not to raw coordinates
    const IbpResult ibp = propagate_ibp(net, build_domain(s0, spec, false));

    BoundCheck report;
    report.samples = samples;
    for (const ImageTensor& s : sample_domain(s0, spec, samples, seed)) {
        const Prediction pred = forward(net, s);
        double escape = 0.0;
        for (int i = 0; i < 4; ++i) {
            escape = std::max(escape, ibp.raw_lo[i] - pred.raw[i]);
            escape = std::max(escape, pred.raw[i] - ibp.raw_hi[i]);
        }
        if (escape > 0.0) {
            ++report.violations;
            report.max_escape = std::max(report.max_escape, escape);
        }
    }
    return report;
}

} // namespace certbox::oracle
