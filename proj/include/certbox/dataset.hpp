#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "certbox/box.hpp"
#include "certbox/errors.hpp"
#include "certbox/perturbation.hpp"

namespace certbox {

/// One test image with its fixed ground-truth box. Ground truths are given in
/// the bottom-left-origin convention of the box types.
struct DatasetEntry {
    std::string image_id;
    ImageTensor image;
    GroundTruth gt;
};

struct Dataset {
    std::vector<DatasetEntry> entries;
};

namespace detail {

// Minimal PGM/PPM reader (P2, P3, P5, P6). Raster rows are stored top-down;
// they are flipped here so that row 0 of the tensor is the bottom of the
// image, matching the y-up box convention.
inline ImageTensor read_pnm(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file)
        throw IoError("cannot open image file: " + path);

    auto next_token = [&]() -> std::string {
        std::string tok;
        while (file) {
            const int ch = file.get();
            if (ch == EOF)
                break;
            if (ch == '#') {
                while (file && file.get() != '\n') {
                }
            } else if (std::isspace(ch)) {
                if (!tok.empty())
                    return tok;
            } else {
                tok.push_back(static_cast<char>(ch));
            }
        }
        if (tok.empty())
            throw ParseError("truncated raster header in " + path);
        return tok;
    };
    auto numeric = [&](const std::string& tok) -> double {
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size())
                throw ParseError("malformed number in raster header of " + path);
            return v;
        } catch (const std::exception&) {
            throw ParseError("malformed number in raster header of " + path);
        }
    };

    const std::string magic = next_token();
    std::size_t channels;
    bool binary;
    if (magic == "P2") {
        channels = 1;
        binary = false;
    } else if (magic == "P3") {
        channels = 3;
        binary = false;
    } else if (magic == "P5") {
        channels = 1;
        binary = true;
    } else if (magic == "P6") {
        channels = 3;
        binary = true;
    } else {
        throw ParseError("unsupported raster magic '" + magic + "' in " + path);
    }

    const std::size_t width = static_cast<std::size_t>(numeric(next_token()));
    const std::size_t height = static_cast<std::size_t>(numeric(next_token()));
    const double maxval = numeric(next_token());
    if (width == 0 || height == 0 || maxval <= 0 || maxval > 255)
        throw ParseError("unsupported raster dimensions in " + path);

    const std::size_t count = width * height * channels;
    std::vector<double> top_down(count);
    if (binary) {
        std::vector<unsigned char> bytes(count);
        file.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count));
        if (static_cast<std::size_t>(file.gcount()) != count)
            throw ParseError("truncated raster data in " + path);
        for (std::size_t i = 0; i < count; ++i)
            top_down[i] = bytes[i] / maxval;
    } else {
        for (std::size_t i = 0; i < count; ++i)
            top_down[i] = numeric(next_token()) / maxval;
    }

    ImageTensor img = ImageTensor::zeros(height, width, channels);
    for (std::size_t row = 0; row < height; ++row) {
        const std::size_t src = row * width * channels;
        const std::size_t dst = (height - 1 - row) * width * channels;
        for (std::size_t i = 0; i < width * channels; ++i)
            img.pixels[dst + i] = top_down[src + i];
    }
    return img;
}

inline void write_pgm(const ImageTensor& img, const std::string& path) {
    if (img.channels != 1)
        throw IoError("PGM output supports single-channel images only");
    std::ofstream file(path, std::ios::binary);
    if (!file)
        throw IoError("cannot write image file: " + path);
    file << "P5\n" << img.width << " " << img.height << "\n255\n";
    for (std::size_t row = 0; row < img.height; ++row) {
        const std::size_t src = (img.height - 1 - row) * img.width;
        for (std::size_t x = 0; x < img.width; ++x) {
            const double v = std::clamp(img.pixels[src + x], 0.0, 1.0);
            file.put(static_cast<char>(std::lround(v * 255.0)));
        }
    }
}

} // namespace detail

/// Load a dataset manifest: { "entries": [ {image_id, gt:[z0,z1,z2,z3],
/// image:"file.pgm" | shape:[h,w,c] + pixels:[...] } ] }. Image paths are
/// relative to the manifest; inline pixel arrays are bottom-origin row-major.
inline Dataset load_dataset(const std::string& manifest_path) {
    std::ifstream file(manifest_path);
    if (!file)
        throw IoError("cannot open dataset manifest: " + manifest_path);
    nlohmann::json doc;
    try {
        file >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("dataset manifest is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array())
        throw ParseError("dataset manifest must carry an 'entries' array");

    const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();

    Dataset ds;
    std::set<std::string> seen;
    for (const auto& node : doc["entries"]) {
        if (!node.is_object() || !node.contains("image_id") || !node.contains("gt"))
            throw ParseError("dataset entry requires image_id and gt");
        const std::string id = node["image_id"].get<std::string>();
        if (!seen.insert(id).second)
            throw ParseError("duplicate image_id in dataset: " + id);

        const auto gtv = node["gt"].get<std::vector<double>>();
        if (gtv.size() != 4)
            throw ParseError("gt must carry 4 coordinates (entry " + id + ")");

        ImageTensor img;
        if (node.contains("image")) {
            img = detail::read_pnm((base / node["image"].get<std::string>()).string());
        } else if (node.contains("pixels") && node.contains("shape")) {
            const auto shape = node["shape"].get<std::vector<std::size_t>>();
            if (shape.size() != 3)
                throw ParseError("shape must be [height, width, channels] (entry " + id + ")");
            img.height = shape[0];
            img.width = shape[1];
            img.channels = shape[2];
            img.pixels = node["pixels"].get<std::vector<double>>();
        } else {
            throw ParseError("dataset entry needs an image file or inline pixels (entry " + id +
                             ")");
        }

        try {
            validate_image(img);
            ds.entries.push_back(DatasetEntry{id, std::move(img),
                                              GroundTruth(gtv[0], gtv[1], gtv[2], gtv[3])});
        } catch (const ValidationError& e) {
            throw ParseError("dataset entry " + id + ": " + e.what());
        }
    }
    return ds;
}

/// Write a dataset as a manifest plus one PGM per image into `dir`.
/// Returns the manifest path.
inline std::string save_dataset(const Dataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json entries = nlohmann::json::array();
    for (const DatasetEntry& e : ds.entries) {
        const std::string filename = e.image_id + ".pgm";
        detail::write_pgm(e.image, (std::filesystem::path(dir) / filename).string());
        nlohmann::json node;
        node["image_id"] = e.image_id;
        node["image"] = filename;
        node["gt"] = {e.gt.box.z0, e.gt.box.z1, e.gt.box.z2, e.gt.box.z3};
        entries.push_back(std::move(node));
    }
    nlohmann::json doc;
    doc["entries"] = std::move(entries);
    const std::string manifest = (std::filesystem::path(dir) / "manifest.json").string();
    std::ofstream file(manifest, std::ios::binary);
    if (!file)
        throw IoError("cannot write dataset manifest: " + manifest);
    file << doc.dump(2) << '\n';
    return manifest;
}

} // namespace certbox
