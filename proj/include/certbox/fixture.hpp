#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "certbox/dataset.hpp"
#include "certbox/network.hpp"
#include "certbox/rng.hpp"

namespace certbox {

/// Synthetic stand-in for the trained digit/runway localizers: a bright
/// rectangle of fixed size on a black background, detected by a hand-built
/// network. Rectangle intensity varies slightly per image so point IoUs
/// spread below 1 and robustness varies across the dataset.
struct FixtureOptions {
    std::size_t images = 20;
    std::size_t height = 16;
    std::size_t width = 16;
    std::size_t rect_w = 5;
    std::size_t rect_h = 4;
    std::uint64_t seed = 1;
};

inline Dataset make_fixture_dataset(const FixtureOptions& opt) {
    if (opt.rect_w == 0 || opt.rect_h == 0 || opt.rect_w > opt.width || opt.rect_h > opt.height)
        throw ValidationError("fixture rectangle does not fit the canvas");
    Rng rng(opt.seed);
    Dataset ds;
    for (std::size_t k = 0; k < opt.images; ++k) {
        const std::size_t x0 = rng.integer(opt.width - opt.rect_w + 1);
        const std::size_t y0 = rng.integer(opt.height - opt.rect_h + 1);
        // intensity on the 1/255 grid so PGM round-trips are exact
        const double intensity = std::round(rng.uniform(0.95, 1.0) * 255.0) / 255.0;

        ImageTensor img = ImageTensor::zeros(opt.height, opt.width, 1);
        for (std::size_t y = y0; y < y0 + opt.rect_h; ++y)
            for (std::size_t x = x0; x < x0 + opt.rect_w; ++x)
                img.at(y, x, 0) = intensity;

        char id[32];
        std::snprintf(id, sizeof id, "img_%03zu", k);
        ds.entries.push_back(DatasetEntry{
            id, std::move(img),
            GroundTruth(static_cast<double>(x0), static_cast<double>(y0),
                        static_cast<double>(x0 + opt.rect_w),
                        static_cast<double>(y0 + opt.rect_h))});
    }
    return ds;
}

/// Hand-built detector for the fixture images. A unit 1x1 convolution and a
/// ReLU feed a dense layer that reads off the intensity-weighted centroid;
/// with a fixed rectangle size the box corners are affine in the pixels, so
/// the clean-image prediction is exact up to the intensity factor.
inline Network make_fixture_detector(const FixtureOptions& opt) {
    const double mass = static_cast<double>(opt.rect_w * opt.rect_h);
    const std::size_t n = opt.height * opt.width;

    std::vector<float> w(4 * n, 0.0f);
    for (std::size_t y = 0; y < opt.height; ++y)
        for (std::size_t x = 0; x < opt.width; ++x) {
            const std::size_t j = y * opt.width + x;
            w[0 * n + j] = static_cast<float>(static_cast<double>(x) / mass);
            w[1 * n + j] = static_cast<float>(static_cast<double>(y) / mass);
            w[2 * n + j] = w[0 * n + j];
            w[3 * n + j] = w[1 * n + j];
        }
    const double half_w = (static_cast<double>(opt.rect_w) - 1.0) / 2.0;
    const double half_h = (static_cast<double>(opt.rect_h) - 1.0) / 2.0;
    std::vector<float> b{static_cast<float>(-half_w), static_cast<float>(-half_h),
                         static_cast<float>(-half_w + static_cast<double>(opt.rect_w)),
                         static_cast<float>(-half_h + static_cast<double>(opt.rect_h))};

    std::vector<Layer> layers;
    layers.push_back(Layer::conv2d(1, 1, 1, 1, 1, 0, {1.0f}, {0.0f}));
    layers.push_back(Layer::relu());
    layers.push_back(Layer::flatten());
    layers.push_back(Layer::dense(n, 4, std::move(w), std::move(b)));
    return Network(opt.height, opt.width, 1, std::move(layers));
}

} // namespace certbox
