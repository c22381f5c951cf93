#pragma once

#include <algorithm>
#include <cmath>

#include "certbox/errors.hpp"

namespace certbox {

/// Closed real interval [lo, hi]. Endpoints are always finite and ordered;
/// every instance that exists is valid.
struct Interval {
    double lo;
    double hi;

    Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
        if (!(std::isfinite(lo) && std::isfinite(hi)))
            throw ValidationError("interval endpoint is not finite");
        if (lo > hi)
            throw ValidationError("interval lower endpoint exceeds upper endpoint");
    }

    static Interval point(double x) { return Interval(x, x); }

    double width() const { return hi - lo; }
    bool contains(double x) const { return lo <= x && x <= hi; }
    bool contains(const Interval& other) const { return lo <= other.lo && other.hi <= hi; }
    bool is_point() const { return lo == hi; }

    friend bool operator==(const Interval& a, const Interval& b) {
        return a.lo == b.lo && a.hi == b.hi;
    }
};

inline Interval add(const Interval& a, const Interval& b) {
    return {a.lo + b.lo, a.hi + b.hi};
}

inline Interval sub(const Interval& a, const Interval& b) {
    return {a.lo - b.hi, a.hi - b.lo};
}

namespace detail {
inline Interval clamp_nonneg(const Interval& a) {
    return {std::max(0.0, a.lo), std::max(0.0, a.hi)};
}
} // namespace detail

/// Product over the nonnegative half line: each operand's endpoints are
/// clamped at 0 first, then the endpoints are multiplied. Negative widths
/// (degenerate boxes) therefore contribute area 0 instead of a sign flip.
inline Interval mul_nonneg(const Interval& a, const Interval& b) {
    const Interval ca = detail::clamp_nonneg(a);
    const Interval cb = detail::clamp_nonneg(b);
    return {ca.lo * cb.lo, ca.hi * cb.hi};
}

/// Reciprocal of an interval strictly inside the positive half line.
inline Interval recip_pos(const Interval& a) {
    if (!(a.lo > 0.0))
        throw NonPositiveDenominator("recip_pos requires a strictly positive interval");
    return {1.0 / a.hi, 1.0 / a.lo};
}

inline Interval imin(const Interval& a, const Interval& b) {
    return {std::min(a.lo, b.lo), std::min(a.hi, b.hi)};
}

inline Interval imax(const Interval& a, const Interval& b) {
    return {std::max(a.lo, b.lo), std::max(a.hi, b.hi)};
}

/// Affine image w*a + c, the atom of interval bound propagation.
inline Interval scale_add(const Interval& a, double w, double c) {
    if (w >= 0.0)
        return {w * a.lo + c, w * a.hi + c};
    return {w * a.hi + c, w * a.lo + c};
}

} // namespace certbox
