#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nix/common.hpp"
#include "nix/png_io.hpp"

namespace nix {

/// RGB image, planar CHW layout, intensities in [0,1].
struct Image {
    int height = 0;
    int width = 0;
    std::vector<real> data;  // 3 * height * width

    Image() = default;
    Image(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(3) * h * w, real(0)) {}

    real& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    real at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
};

inline std::uint8_t to_byte(real v) {
    const real c = std::clamp(v, real(0), real(1));
    return static_cast<std::uint8_t>(std::lround(c * real(255)));
}

inline Image load_image(const std::string& path) {
    const PngBuffer buf = read_png(path);
    Image img(buf.height, buf.width);
    for (int y = 0; y < buf.height; ++y) {
        for (int x = 0; x < buf.width; ++x) {
            const std::size_t base = (static_cast<std::size_t>(y) * buf.width + x) * buf.channels;
            for (int c = 0; c < 3; ++c) {
                const std::uint8_t b = buf.pixels[base + (buf.channels == 1 ? 0 : c)];
                img.at(c, y, x) = static_cast<real>(b) / real(255);
            }
        }
    }
    return img;
}

inline void save_image(const std::string& path, const Image& img) {
    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(img.height) * img.width * 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                pixels[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] =
                    to_byte(img.at(c, y, x));
    write_png(path, img.height, img.width, 3, pixels.data());
}

}  // namespace nix
