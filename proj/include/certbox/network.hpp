#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "certbox/errors.hpp"
#include "certbox/iou_bounds.hpp"
#include "certbox/perturbation.hpp"

namespace certbox {

enum class LayerKind { Dense, Conv2D, ReLU, MaxPool2D, Flatten };

/// One layer of a detection network. Weights are stored as the file stores
/// them (32-bit floats); all propagation accumulates in double.
struct Layer {
    LayerKind kind = LayerKind::ReLU;

    // Dense
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<float> weights;  // Dense: out x in, row-major. Conv2D: out_ch x in_ch x kh x kw.
    std::vector<float> bias;

    // Conv2D
    std::size_t out_channels = 0;
    std::size_t in_channels = 0;
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;

    // MaxPool2D
    std::size_t window_h = 0;
    std::size_t window_w = 0;

    static Layer dense(std::size_t in, std::size_t out, std::vector<float> w,
                       std::vector<float> b) {
        Layer l;
        l.kind = LayerKind::Dense;
        l.in = in;
        l.out = out;
        l.weights = std::move(w);
        l.bias = std::move(b);
        return l;
    }

    static Layer conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw,
                        std::size_t stride, std::size_t padding, std::vector<float> w,
                        std::vector<float> b) {
        Layer l;
        l.kind = LayerKind::Conv2D;
        l.in_channels = in_ch;
        l.out_channels = out_ch;
        l.kernel_h = kh;
        l.kernel_w = kw;
        l.stride = stride;
        l.padding = padding;
        l.weights = std::move(w);
        l.bias = std::move(b);
        return l;
    }

    static Layer relu() {
        Layer l;
        l.kind = LayerKind::ReLU;
        return l;
    }

    static Layer maxpool2d(std::size_t wh, std::size_t ww, std::size_t stride) {
        Layer l;
        l.kind = LayerKind::MaxPool2D;
        l.window_h = wh;
        l.window_w = ww;
        l.stride = stride;
        return l;
    }

    static Layer flatten() {
        Layer l;
        l.kind = LayerKind::Flatten;
        return l;
    }
};

namespace detail {

struct TensorDims {
    std::size_t h = 0;
    std::size_t w = 0;
    std::size_t c = 0;

    std::size_t size() const { return h * w * c; }
};

inline TensorDims layer_output_dims(const Layer& l, const TensorDims& in) {
    switch (l.kind) {
    case LayerKind::Dense:
        if (in.h != 1 || in.w != 1)
            throw ShapeMismatch("dense layer requires a flattened input");
        if (in.c != l.in)
            throw ShapeMismatch("dense layer input size mismatch");
        if (l.weights.size() != l.in * l.out || l.bias.size() != l.out)
            throw ShapeMismatch("dense layer weight or bias size mismatch");
        return {1, 1, l.out};
    case LayerKind::Conv2D: {
        if (in.c != l.in_channels)
            throw ShapeMismatch("conv layer input channel mismatch");
        if (l.weights.size() != l.out_channels * l.in_channels * l.kernel_h * l.kernel_w ||
            l.bias.size() != l.out_channels)
            throw ShapeMismatch("conv layer weight or bias size mismatch");
        if (l.stride == 0)
            throw ShapeMismatch("conv stride must be positive");
        if (in.h + 2 * l.padding < l.kernel_h || in.w + 2 * l.padding < l.kernel_w)
            throw ShapeMismatch("conv kernel larger than padded input");
        const std::size_t oh = (in.h + 2 * l.padding - l.kernel_h) / l.stride + 1;
        const std::size_t ow = (in.w + 2 * l.padding - l.kernel_w) / l.stride + 1;
        return {oh, ow, l.out_channels};
    }
    case LayerKind::MaxPool2D: {
        if (l.stride == 0)
            throw ShapeMismatch("pool stride must be positive");
        if (in.h < l.window_h || in.w < l.window_w)
            throw ShapeMismatch("pool window larger than input");
        const std::size_t oh = (in.h - l.window_h) / l.stride + 1;
        const std::size_t ow = (in.w - l.window_w) / l.stride + 1;
        return {oh, ow, in.c};
    }
    case LayerKind::Flatten:
        return {1, 1, in.size()};
    default:  // ReLU
        return in;
    }
}

} // namespace detail

/// Single-object detector: an ordered list of layers mapping an image to the
/// 4 box coordinates [z0, z1, z2, z3]. Shape composition and the 4-output
/// contract are validated at construction.
struct Network {
    std::size_t input_h = 0;
    std::size_t input_w = 0;
    std::size_t input_c = 0;
    std::vector<Layer> layers;

    Network(std::size_t h, std::size_t w, std::size_t c, std::vector<Layer> ls)
        : input_h(h), input_w(w), input_c(c), layers(std::move(ls)) {
        detail::TensorDims dims{input_h, input_w, input_c};
        if (dims.size() == 0)
            throw ShapeMismatch("network input shape has zero size");
        for (const Layer& l : layers)
            dims = detail::layer_output_dims(l, dims);
        if (dims.h != 1 || dims.w != 1 || dims.c != 4)
            throw ShapeMismatch("network must end with exactly 4 outputs");
    }
};

/// Exact forward pass. The raw 4 outputs are kept as produced; an output
/// violating the corner ordering is flagged, not repaired.
struct Prediction {
    std::array<double, 4> raw{};
    bool malformed = false;

    std::optional<BBox> box() const {
        if (malformed)
            return std::nullopt;
        return BBox(raw[0], raw[1], raw[2], raw[3]);
    }
};

namespace detail {

inline void dense_value(const Layer& l, const std::vector<double>& in, std::vector<double>& out) {
    out.assign(l.out, 0.0);
    for (std::size_t i = 0; i < l.out; ++i) {
        double acc = l.bias[i];
        const float* row = l.weights.data() + i * l.in;
        for (std::size_t j = 0; j < l.in; ++j)
            acc += static_cast<double>(row[j]) * in[j];
        out[i] = acc;
    }
}

inline void dense_interval(const Layer& l, const std::vector<double>& in_lo,
                           const std::vector<double>& in_hi, std::vector<double>& out_lo,
                           std::vector<double>& out_hi) {
    out_lo.assign(l.out, 0.0);
    out_hi.assign(l.out, 0.0);
    for (std::size_t i = 0; i < l.out; ++i) {
        double lo = l.bias[i];
        double hi = l.bias[i];
        const float* row = l.weights.data() + i * l.in;
        for (std::size_t j = 0; j < l.in; ++j) {
            const double w = row[j];
            if (w >= 0.0) {
                lo += w * in_lo[j];
                hi += w * in_hi[j];
            } else {
                lo += w * in_hi[j];
                hi += w * in_lo[j];
            }
        }
        out_lo[i] = lo;
        out_hi[i] = hi;
    }
}

template <typename PerWeight>
inline void conv_walk(const Layer& l, const TensorDims& in, const TensorDims& out,
                      std::size_t oy, std::size_t ox, std::size_t oc, PerWeight&& per_weight) {
    (void)out;
    for (std::size_t ic = 0; ic < l.in_channels; ++ic)
        for (std::size_t ky = 0; ky < l.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < l.kernel_w; ++kx) {
                const std::ptrdiff_t iy =
                    static_cast<std::ptrdiff_t>(oy * l.stride + ky) -
                    static_cast<std::ptrdiff_t>(l.padding);
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(ox * l.stride + kx) -
                    static_cast<std::ptrdiff_t>(l.padding);
                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(in.h) ||
                    ix >= static_cast<std::ptrdiff_t>(in.w))
                    continue;  // zero padding contributes nothing
                const std::size_t in_idx =
                    (static_cast<std::size_t>(iy) * in.w + static_cast<std::size_t>(ix)) * in.c +
                    ic;
                const std::size_t w_idx =
                    ((oc * l.in_channels + ic) * l.kernel_h + ky) * l.kernel_w + kx;
                per_weight(static_cast<double>(l.weights[w_idx]), in_idx);
            }
}

inline void conv_value(const Layer& l, const TensorDims& in_dims, const std::vector<double>& in,
                       const TensorDims& out_dims, std::vector<double>& out) {
    out.assign(out_dims.size(), 0.0);
    for (std::size_t oy = 0; oy < out_dims.h; ++oy)
        for (std::size_t ox = 0; ox < out_dims.w; ++ox)
            for (std::size_t oc = 0; oc < out_dims.c; ++oc) {
                double acc = l.bias[oc];
                conv_walk(l, in_dims, out_dims, oy, ox, oc,
                          [&](double w, std::size_t idx) { acc += w * in[idx]; });
                out[(oy * out_dims.w + ox) * out_dims.c + oc] = acc;
            }
}

inline void conv_interval(const Layer& l, const TensorDims& in_dims,
                          const std::vector<double>& in_lo, const std::vector<double>& in_hi,
                          const TensorDims& out_dims, std::vector<double>& out_lo,
                          std::vector<double>& out_hi) {
    out_lo.assign(out_dims.size(), 0.0);
    out_hi.assign(out_dims.size(), 0.0);
    for (std::size_t oy = 0; oy < out_dims.h; ++oy)
        for (std::size_t ox = 0; ox < out_dims.w; ++ox)
            for (std::size_t oc = 0; oc < out_dims.c; ++oc) {
                double lo = l.bias[oc];
                double hi = l.bias[oc];
                conv_walk(l, in_dims, out_dims, oy, ox, oc, [&](double w, std::size_t idx) {
                    if (w >= 0.0) {
                        lo += w * in_lo[idx];
                        hi += w * in_hi[idx];
                    } else {
                        lo += w * in_hi[idx];
                        hi += w * in_lo[idx];
                    }
                });
                const std::size_t o = (oy * out_dims.w + ox) * out_dims.c + oc;
                out_lo[o] = lo;
                out_hi[o] = hi;
            }
}

template <typename Reduce>
inline void pool_apply(const Layer& l, const TensorDims& in_dims, const TensorDims& out_dims,
                       Reduce&& reduce) {
    for (std::size_t oy = 0; oy < out_dims.h; ++oy)
        for (std::size_t ox = 0; ox < out_dims.w; ++ox)
            for (std::size_t c = 0; c < out_dims.c; ++c) {
                const std::size_t o = (oy * out_dims.w + ox) * out_dims.c + c;
                bool first = true;
                for (std::size_t ky = 0; ky < l.window_h; ++ky)
                    for (std::size_t kx = 0; kx < l.window_w; ++kx) {
                        const std::size_t iy = oy * l.stride + ky;
                        const std::size_t ix = ox * l.stride + kx;
                        const std::size_t i = (iy * in_dims.w + ix) * in_dims.c + c;
                        reduce(o, i, first);
                        first = false;
                    }
            }
}

} // namespace detail

inline Prediction forward(const Network& net, const ImageTensor& s) {
    if (s.height != net.input_h || s.width != net.input_w || s.channels != net.input_c)
        throw ShapeMismatch("image does not match the network input shape");

    detail::TensorDims dims{net.input_h, net.input_w, net.input_c};
    std::vector<double> act = s.pixels;
    std::vector<double> next;

    for (const Layer& l : net.layers) {
        const detail::TensorDims out_dims = detail::layer_output_dims(l, dims);
        switch (l.kind) {
        case LayerKind::Dense:
            detail::dense_value(l, act, next);
            act.swap(next);
            break;
        case LayerKind::Conv2D:
            detail::conv_value(l, dims, act, out_dims, next);
            act.swap(next);
            break;
        case LayerKind::ReLU:
            for (double& v : act)
                v = std::max(0.0, v);
            break;
        case LayerKind::MaxPool2D:
            next.assign(out_dims.size(), 0.0);
            detail::pool_apply(l, dims, out_dims, [&](std::size_t o, std::size_t i, bool first) {
                next[o] = first ? act[i] : std::max(next[o], act[i]);
            });
            act.swap(next);
            break;
        case LayerKind::Flatten:
            break;  // HWC storage is already flat
        }
        dims = out_dims;
    }

    Prediction p;
    p.raw = {act[0], act[1], act[2], act[3]};
    p.malformed = act[0] > act[2] || act[1] > act[3];
    return p;
}

/// Interval bound propagation result. `bounds` is the corner-ordered
/// enclosure consumed by step 2: where the raw output intervals violate the
/// ordering, z2 absorbs z0 from below and z3 absorbs z1, which is exactly the
/// interval image of the degenerate-box saturation and so stays sound for the
/// set. The unrepaired per-coordinate intervals are kept alongside: raw
/// forward outputs are only guaranteed to lie inside those.
struct IbpResult {
    BoxBounds bounds;
    std::array<double, 4> raw_lo{};
    std::array<double, 4> raw_hi{};
    bool ordering_repaired = false;
};

inline IbpResult propagate_ibp(const Network& net, const InputBounds& in) {
    if (in.height != net.input_h || in.width != net.input_w || in.channels != net.input_c)
        throw ShapeMismatch("input bounds do not match the network input shape");

    detail::TensorDims dims{net.input_h, net.input_w, net.input_c};
    std::vector<double> lo = in.lo;
    std::vector<double> hi = in.hi;
    std::vector<double> next_lo;
    std::vector<double> next_hi;

    for (const Layer& l : net.layers) {
        const detail::TensorDims out_dims = detail::layer_output_dims(l, dims);
        switch (l.kind) {
        case LayerKind::Dense:
            detail::dense_interval(l, lo, hi, next_lo, next_hi);
            lo.swap(next_lo);
            hi.swap(next_hi);
            break;
        case LayerKind::Conv2D:
            detail::conv_interval(l, dims, lo, hi, out_dims, next_lo, next_hi);
            lo.swap(next_lo);
            hi.swap(next_hi);
            break;
        case LayerKind::ReLU:
            for (double& v : lo)
                v = std::max(0.0, v);
            for (double& v : hi)
                v = std::max(0.0, v);
            break;
        case LayerKind::MaxPool2D:
            next_lo.assign(out_dims.size(), 0.0);
            next_hi.assign(out_dims.size(), 0.0);
            detail::pool_apply(l, dims, out_dims, [&](std::size_t o, std::size_t i, bool first) {
                next_lo[o] = first ? lo[i] : std::max(next_lo[o], lo[i]);
                next_hi[o] = first ? hi[i] : std::max(next_hi[o], hi[i]);
            });
            lo.swap(next_lo);
            hi.swap(next_hi);
            break;
        case LayerKind::Flatten:
            break;
        }
        dims = out_dims;
    }

    const double z2_lo = std::max(lo[2], lo[0]);
    const double z2_hi = std::max(hi[2], hi[0]);
    const double z3_lo = std::max(lo[3], lo[1]);
    const double z3_hi = std::max(hi[3], hi[1]);
    const bool repaired = z2_lo != lo[2] || z2_hi != hi[2] || z3_lo != lo[3] || z3_hi != hi[3];

    return {BoxBounds(Interval(lo[0], hi[0]), Interval(lo[1], hi[1]), Interval(z2_lo, z2_hi),
                      Interval(z3_lo, z3_hi)),
            {lo[0], lo[1], lo[2], lo[3]},
            {hi[0], hi[1], hi[2], hi[3]},
            repaired};
}

// ---------------------------------------------------------------------------
// Model file I/O. JSON with base64-encoded little-endian float32 weights on
// write; nested arrays are accepted on read. Writing is canonical, so
// save(load(f)) reproduces a saved file byte for byte.
// ---------------------------------------------------------------------------

namespace detail {

inline const char* b64_alphabet() {
    return "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

inline std::string base64_encode(const std::vector<std::uint8_t>& data) {
    const char* tbl = b64_alphabet();
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= data.size()) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out.push_back(tbl[v & 63]);
        i += 3;
    }
    const std::size_t rest = data.size() - i;
    if (rest == 1) {
        const std::uint32_t v = data[i] << 16;
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.append("==");
    } else if (rest == 2) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
    std::array<int, 256> rev;
    rev.fill(-1);
    const char* tbl = b64_alphabet();
    for (int i = 0; i < 64; ++i)
        rev[static_cast<unsigned char>(tbl[i])] = i;

    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    std::uint32_t buf = 0;
    int bits = 0;
    for (char ch : text) {
        if (ch == '=')
            break;
        const int v = rev[static_cast<unsigned char>(ch)];
        if (v < 0)
            throw ParseError("invalid base64 character in weight data");
        buf = (buf << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((buf >> bits) & 0xff));
        }
    }
    return out;
}

inline std::string floats_to_base64(const std::vector<float>& v) {
    std::vector<std::uint8_t> bytes(v.size() * 4);
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint32_t u;
        std::memcpy(&u, &v[i], 4);
        bytes[4 * i + 0] = static_cast<std::uint8_t>(u & 0xff);
        bytes[4 * i + 1] = static_cast<std::uint8_t>((u >> 8) & 0xff);
        bytes[4 * i + 2] = static_cast<std::uint8_t>((u >> 16) & 0xff);
        bytes[4 * i + 3] = static_cast<std::uint8_t>((u >> 24) & 0xff);
    }
    return base64_encode(bytes);
}

inline std::vector<float> base64_to_floats(const std::string& text) {
    const std::vector<std::uint8_t> bytes = base64_decode(text);
    if (bytes.size() % 4 != 0)
        throw ParseError("base64 weight data is not a whole number of 32-bit floats");
    std::vector<float> v(bytes.size() / 4);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * i]) |
                                (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                                (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                                (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
        std::memcpy(&v[i], &u, 4);
    }
    return v;
}

inline void flatten_numbers(const nlohmann::json& node, std::vector<float>& out) {
    if (node.is_array()) {
        for (const auto& child : node)
            flatten_numbers(child, out);
    } else if (node.is_number()) {
        out.push_back(node.get<float>());
    } else {
        throw ParseError("weight arrays may contain only numbers");
    }
}

inline std::vector<float> parse_weights(const nlohmann::json& node) {
    if (node.is_string())
        return base64_to_floats(node.get<std::string>());
    if (node.is_array()) {
        std::vector<float> out;
        flatten_numbers(node, out);
        return out;
    }
    throw ParseError("weights must be a base64 string or a (nested) array of numbers");
}

template <typename T>
inline T require(const nlohmann::json& obj, const char* key) {
    if (!obj.contains(key))
        throw ParseError(std::string("missing field '") + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(std::string("field '") + key + "' has the wrong type");
    }
}

} // namespace detail

inline Network load_network(const std::string& path) {
    std::ifstream file(path);
    if (!file)
        throw IoError("cannot open model file: " + path);
    nlohmann::json doc;
    try {
        file >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw ParseError("model file must contain a JSON object");
    if (detail::require<int>(doc, "version") != 1)
        throw ParseError("unsupported model file version");

    const auto shape = detail::require<std::vector<std::size_t>>(doc, "input_shape");
    if (shape.size() != 3)
        throw ParseError("input_shape must be [height, width, channels]");

    if (!doc.contains("layers") || !doc["layers"].is_array())
        throw ParseError("model file must list layers");

    std::vector<Layer> layers;
    for (const auto& node : doc["layers"]) {
        if (!node.is_object())
            throw ParseError("layer entries must be objects");
        const std::string kind = detail::require<std::string>(node, "kind");
        if (kind == "dense") {
            if (!node.contains("weights") || !node.contains("bias"))
                throw ParseError("dense layer requires weights and bias");
            layers.push_back(Layer::dense(detail::require<std::size_t>(node, "in"),
                                          detail::require<std::size_t>(node, "out"),
                                          detail::parse_weights(node.at("weights")),
                                          detail::parse_weights(node.at("bias"))));
        } else if (kind == "conv2d") {
            const auto kernel = detail::require<std::vector<std::size_t>>(node, "kernel");
            if (kernel.size() != 2)
                throw ParseError("conv kernel must be [kh, kw]");
            if (!node.contains("weights") || !node.contains("bias"))
                throw ParseError("conv layer requires weights and bias");
            layers.push_back(Layer::conv2d(detail::require<std::size_t>(node, "in_channels"),
                                           detail::require<std::size_t>(node, "out_channels"),
                                           kernel[0], kernel[1],
                                           detail::require<std::size_t>(node, "stride"),
                                           detail::require<std::size_t>(node, "padding"),
                                           detail::parse_weights(node.at("weights")),
                                           detail::parse_weights(node.at("bias"))));
        } else if (kind == "relu") {
            layers.push_back(Layer::relu());
        } else if (kind == "flatten") {
            layers.push_back(Layer::flatten());
        } else if (kind == "maxpool2d") {
            const auto window = detail::require<std::vector<std::size_t>>(node, "window");
            if (window.size() != 2)
                throw ParseError("pool window must be [h, w]");
            layers.push_back(
                Layer::maxpool2d(window[0], window[1], detail::require<std::size_t>(node, "stride")));
        } else {
            throw UnsupportedLayer("unsupported layer kind: " + kind);
        }
    }
    return Network(shape[0], shape[1], shape[2], std::move(layers));
}

inline void save_network(const Network& net, const std::string& path) {
    nlohmann::json doc;
    doc["version"] = 1;
    doc["input_shape"] = {net.input_h, net.input_w, net.input_c};
    nlohmann::json layers = nlohmann::json::array();
    for (const Layer& l : net.layers) {
        nlohmann::json node;
        switch (l.kind) {
        case LayerKind::Dense:
            node["kind"] = "dense";
            node["in"] = l.in;
            node["out"] = l.out;
            node["weights"] = detail::floats_to_base64(l.weights);
            node["bias"] = detail::floats_to_base64(l.bias);
            break;
        case LayerKind::Conv2D:
            node["kind"] = "conv2d";
            node["in_channels"] = l.in_channels;
            node["out_channels"] = l.out_channels;
            node["kernel"] = {l.kernel_h, l.kernel_w};
            node["stride"] = l.stride;
            node["padding"] = l.padding;
            node["weights"] = detail::floats_to_base64(l.weights);
            node["bias"] = detail::floats_to_base64(l.bias);
            break;
        case LayerKind::ReLU:
            node["kind"] = "relu";
            break;
        case LayerKind::MaxPool2D:
            node["kind"] = "maxpool2d";
            node["window"] = {l.window_h, l.window_w};
            node["stride"] = l.stride;
            break;
        case LayerKind::Flatten:
            node["kind"] = "flatten";
            break;
        }
        layers.push_back(std::move(node));
    }
    doc["layers"] = std::move(layers);

    std::ofstream file(path, std::ios::binary);
    if (!file)
        throw IoError("cannot write model file: " + path);
    file << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// External box bounds (solver-agnostic Step 1): records of per-image lower
// and upper corners computed by an outside verification tool.
// ---------------------------------------------------------------------------

using BoundsMap = std::map<std::string, BoxBounds>;

inline BoundsMap load_external_bounds(const std::string& path) {
    std::ifstream file(path);
    if (!file)
        throw IoError("cannot open bounds file: " + path);
    nlohmann::json doc;
    try {
        file >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bounds file is not valid JSON: ") + e.what());
    }
    if (!doc.is_array())
        throw ParseError("bounds file must contain a JSON array of records");

    BoundsMap map;
    for (const auto& node : doc) {
        if (!node.is_object())
            throw ParseError("bounds records must be objects");
        std::string id;
        if (node.contains("image_id"))
            id = detail::require<std::string>(node, "image_id");
        else if (node.contains("id"))
            id = detail::require<std::string>(node, "id");
        else
            throw ParseError("bounds record is missing its image_id");
        const auto lower = detail::require<std::vector<double>>(node, "lower");
        const auto upper = detail::require<std::vector<double>>(node, "upper");
        if (lower.size() != 4 || upper.size() != 4)
            throw ParseError("bounds record must carry 4 lower and 4 upper coordinates");
        const BoxBounds bb = BoxBounds::from_corners({lower[0], lower[1], lower[2], lower[3]},
                                                     {upper[0], upper[1], upper[2], upper[3]});
        if (!map.emplace(id, bb).second)
            throw ParseError("duplicate image_id in bounds file: " + id);
    }
    return map;
}

inline void save_external_bounds(const BoundsMap& map, const std::string& path) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& [id, bb] : map) {
        nlohmann::json node;
        node["image_id"] = id;
        node["lower"] = {bb.z0.lo, bb.z1.lo, bb.z2.lo, bb.z3.lo};
        node["upper"] = {bb.z0.hi, bb.z1.hi, bb.z2.hi, bb.z3.hi};
        doc.push_back(std::move(node));
    }
    std::ofstream file(path, std::ios::binary);
    if (!file)
        throw IoError("cannot write bounds file: " + path);
    file << doc.dump(2) << '\n';
}

} // namespace certbox
