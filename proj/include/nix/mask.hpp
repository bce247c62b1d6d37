#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nix/common.hpp"
#include "nix/png_io.hpp"
#include "nix/rng.hpp"

namespace nix {

/// Binary mask, 1 = inpainted pixel (the positive class for detection and
/// IoU). The compositing convention with inverted polarity is produced by
/// to_composite_convention.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;  // values in {0,1}

    BinaryMask() = default;
    BinaryMask(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0) {}

    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

struct IntRange {
    int lo = 0;
    int hi = 0;
};

struct MaskParams {
    IntRange num_strokes{1, 5};
    IntRange num_vertices{4, 12};
    double brush_width_lo = 12.0;  // pixels at a 256-px reference size
    double brush_width_hi = 40.0;
    double max_turn_angle = 1.5707963267948966;  // pi/2
    double min_coverage = 0.05;
    double max_coverage = 0.5;
    std::uint64_t seed = 0;
};

inline double mask_coverage(const BinaryMask& m) {
    std::size_t ones = 0;
    for (std::uint8_t v : m.data) ones += v;
    return static_cast<double>(ones) / (static_cast<double>(m.height) * m.width);
}

inline BinaryMask to_composite_convention(const BinaryMask& m) {
    BinaryMask out(m.height, m.width);
    for (std::size_t i = 0; i < m.data.size(); ++i)
        out.data[i] = static_cast<std::uint8_t>(1 - m.data[i]);
    return out;
}

namespace detail {

/// Marks pixels whose center lies within `radius` of segment (x0,y0)-(x1,y1).
inline void stamp_segment(BinaryMask& m, double x0, double y0, double x1, double y1,
                          double radius) {
    const double min_x = std::min(x0, x1) - radius, max_x = std::max(x0, x1) + radius;
    const double min_y = std::min(y0, y1) - radius, max_y = std::max(y0, y1) + radius;
    const int px0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
    const int px1 = std::min(m.width - 1, static_cast<int>(std::ceil(max_x - 0.5)));
    const int py0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
    const int py1 = std::min(m.height - 1, static_cast<int>(std::ceil(max_y - 0.5)));
    const double dx = x1 - x0, dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    const double r2 = radius * radius;
    for (int py = py0; py <= py1; ++py) {
        for (int px = px0; px <= px1; ++px) {
            const double cx = px + 0.5, cy = py + 0.5;
            double t = 0.0;
            if (len2 > 0.0) t = std::clamp(((cx - x0) * dx + (cy - y0) * dy) / len2, 0.0, 1.0);
            const double ex = cx - (x0 + t * dx), ey = cy - (y0 + t * dy);
            if (ex * ex + ey * ey <= r2) m.at(py, px) = 1;
        }
    }
}

inline BinaryMask draw_strokes(int h, int w, const MaskParams& p, Rng& rng) {
    BinaryMask m(h, w);
    const double scale = static_cast<double>(std::min(h, w)) / 256.0;
    const double seg_len_lo = 0.05 * std::min(h, w);
    const double seg_len_hi = 0.25 * std::min(h, w);
    const int strokes = static_cast<int>(rng.uniform_int(p.num_strokes.lo, p.num_strokes.hi));
    for (int s = 0; s < strokes; ++s) {
        const int verts = static_cast<int>(rng.uniform_int(p.num_vertices.lo, p.num_vertices.hi));
        const double radius = 0.5 * rng.uniform(p.brush_width_lo, p.brush_width_hi) * scale;
        double x = rng.uniform(0.0, w);
        double y = rng.uniform(0.0, h);
        double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        for (int v = 1; v < verts; ++v) {
            angle += rng.uniform(-p.max_turn_angle, p.max_turn_angle);
            const double len = rng.uniform(seg_len_lo, seg_len_hi);
            double nx = std::clamp(x + len * std::cos(angle), 0.0, static_cast<double>(w));
            double ny = std::clamp(y + len * std::sin(angle), 0.0, static_cast<double>(h));
            stamp_segment(m, x, y, nx, ny, radius);
            x = nx;
            y = ny;
        }
        if (verts == 1) stamp_segment(m, x, y, x, y, radius);
    }
    return m;
}

}  // namespace detail

/// Free-form irregular mask: random thick polylines with bounded turn angles,
/// resampled until coverage lands in [min_coverage, max_coverage].
inline BinaryMask random_irregular_mask(int h, int w, const MaskParams& params) {
    if (h < 32 || w < 32)
        throw InvalidDimensions("mask dimensions must be at least 32x32, got " +
                                std::to_string(h) + "x" + std::to_string(w));
    if (params.num_strokes.lo > params.num_strokes.hi || params.num_vertices.lo > params.num_vertices.hi ||
        params.brush_width_lo > params.brush_width_hi || params.min_coverage >= params.max_coverage ||
        params.min_coverage <= 0.0 || params.max_coverage >= 1.0)
        throw InvalidDimensions("invalid mask parameters");

    Rng rng(params.seed);
    constexpr int kMaxAttempts = 50;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        BinaryMask m = detail::draw_strokes(h, w, params, rng);
        const double cov = mask_coverage(m);
        if (cov >= params.min_coverage && cov <= params.max_coverage) return m;
    }
    throw CoverageUnsatisfiable("no mask within coverage range after " +
                                std::to_string(kMaxAttempts) + " attempts");
}

/// Masks persist as 8-bit gray PNG, 255 = inpainted, 0 = real.
inline void save_mask(const std::string& path, const BinaryMask& m) {
    std::vector<std::uint8_t> pixels(m.data.size());
    for (std::size_t i = 0; i < m.data.size(); ++i) pixels[i] = m.data[i] ? 255 : 0;
    write_png(path, m.height, m.width, 1, pixels.data());
}

inline BinaryMask load_mask(const std::string& path) {
    const PngBuffer buf = read_png(path);
    BinaryMask m(buf.height, buf.width);
    for (std::size_t i = 0; i < m.data.size(); ++i)
        m.data[i] = buf.pixels[i * buf.channels] >= 128 ? 1 : 0;
    return m;
}

}  // namespace nix
