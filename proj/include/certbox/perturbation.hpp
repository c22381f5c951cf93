#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "certbox/errors.hpp"
#include "certbox/rng.hpp"

namespace certbox {

/// Normalized image, row-major HWC with row 0 at the BOTTOM of the image
/// (y grows up, matching the box coordinate convention). Dataset images are
/// required to lie in [0, 1] (see validate_image); perturbed samples may
/// leave that range because perturbation domains are not clamped by default.
struct ImageTensor {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<double> pixels;

    static ImageTensor zeros(std::size_t h, std::size_t w, std::size_t c) {
        return {h, w, c, std::vector<double>(h * w * c, 0.0)};
    }

    std::size_t size() const { return pixels.size(); }

    double& at(std::size_t y, std::size_t x, std::size_t c) {
        return pixels[(y * width + x) * channels + c];
    }
    double at(std::size_t y, std::size_t x, std::size_t c) const {
        return pixels[(y * width + x) * channels + c];
    }
};

/// Dataset-image contract: consistent dimensions and intensities in [0, 1].
inline void validate_image(const ImageTensor& img) {
    if (img.pixels.size() != img.height * img.width * img.channels)
        throw ValidationError("image pixel count does not match its dimensions");
    for (double p : img.pixels)
        if (!(p >= 0.0 && p <= 1.0))
            throw ValidationError("image pixel outside [0, 1]");
}

enum class PerturbationKind { WhiteNoise, Brightness, Contrast };

/// Reading of the contrast coefficient: Literal applies the printed formula
/// s = s0 * alpha_c with alpha_c in [-m, m]; Relative reads it as a deviation
/// around identity, s = s0 * (1 + alpha_c).
enum class ContrastMode { Literal, Relative };

struct PerturbationSpec {
    PerturbationKind kind;
    /// Half-width of the coefficient range: epsilon for white noise, alpha_b
    /// for brightness, alpha_c for contrast. Ranges are symmetric around 0.
    double magnitude;
    ContrastMode contrast_mode;

    PerturbationSpec(PerturbationKind k, double m, ContrastMode cm = ContrastMode::Relative)
        : kind(k), magnitude(m), contrast_mode(cm) {
        if (!(magnitude >= 0.0))
            throw ValidationError("perturbation magnitude must be >= 0");
    }
};

inline std::string kind_name(PerturbationKind k) {
    switch (k) {
    case PerturbationKind::WhiteNoise: return "whitenoise";
    case PerturbationKind::Brightness: return "brightness";
    default: return "contrast";
    }
}

inline std::string contrast_mode_name(ContrastMode m) {
    return m == ContrastMode::Literal ? "literal" : "relative";
}

/// Elementwise interval hull of a perturbation domain.
struct InputBounds {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t size() const { return lo.size(); }
};

/// Interval hull of the perturbation domain around s0. White noise and
/// brightness give [s - m, s + m]; contrast gives [-m*s, m*s] (Literal) or
/// [s*(1 - m), s*(1 + m)] (Relative). With clamp01 every interval is
/// intersected with [0, 1].
inline InputBounds build_domain(const ImageTensor& s0, const PerturbationSpec& spec,
                                bool clamp01 = false) {
    InputBounds out;
    out.height = s0.height;
    out.width = s0.width;
    out.channels = s0.channels;
    out.lo.resize(s0.size());
    out.hi.resize(s0.size());

    const double m = spec.magnitude;
    for (std::size_t i = 0; i < s0.size(); ++i) {
        const double s = s0.pixels[i];
        double lo, hi;
        switch (spec.kind) {
        case PerturbationKind::WhiteNoise:
        case PerturbationKind::Brightness:
            lo = s - m;
            hi = s + m;
            break;
        default:
            if (spec.contrast_mode == ContrastMode::Literal) {
                lo = -m * s;
                hi = m * s;
            } else {
                lo = s * (1.0 - m);
                hi = s * (1.0 + m);
            }
            break;
        }
        if (clamp01) {
            lo = std::max(lo, 0.0);
            hi = std::min(hi, 1.0);
            if (lo > hi)
                throw EmptyDomain("clamping emptied a pixel interval");
        }
        out.lo[i] = lo;
        out.hi[i] = hi;
    }
    return out;
}

/// Deterministic samples from the perturbation domain, preserving its
/// structure: white noise draws every pixel independently, brightness and
/// contrast draw one coefficient per sample and apply it uniformly. Samples
/// are never clamped, matching build_domain with clamp01 off.
inline std::vector<ImageTensor> sample_domain(const ImageTensor& s0, const PerturbationSpec& spec,
                                              std::size_t count, std::uint64_t seed) {
    if (count < 1)
        throw ValidationError("sample count must be >= 1");
    Rng rng(seed);
    std::vector<ImageTensor> samples;
    samples.reserve(count);
    const double m = spec.magnitude;
    for (std::size_t k = 0; k < count; ++k) {
        ImageTensor s = s0;
        switch (spec.kind) {
        case PerturbationKind::WhiteNoise:
            for (double& p : s.pixels)
                p += rng.uniform(-m, m);
            break;
        case PerturbationKind::Brightness: {
            const double shift = rng.uniform(-m, m);
            for (double& p : s.pixels)
                p += shift;
            break;
        }
        default: {
            const double alpha = rng.uniform(-m, m);
            const double factor = spec.contrast_mode == ContrastMode::Literal ? alpha : 1.0 + alpha;
            for (double& p : s.pixels)
                p *= factor;
            break;
        }
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

} // namespace certbox
