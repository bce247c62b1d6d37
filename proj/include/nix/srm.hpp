#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "nix/common.hpp"
#include "nix/image.hpp"

namespace nix {

/// Three fixed 5x5 zero-sum high-pass kernels from the steganalysis rich
/// model family, already divided by their normalizers.
// Double precision keeps the zero-sum property of the /12 kernel intact.
struct FilterBank {
    std::array<std::array<std::array<double, 5>, 5>, 3> kernels;
};

inline FilterBank srm_kernels() {
    FilterBank bank{};
    // 5x5 second-order "KV" kernel, normalizer 12.
    const int kv[5][5] = {{-1, 2, -2, 2, -1},
                          {2, -6, 8, -6, 2},
                          {-2, 8, -12, 8, -2},
                          {2, -6, 8, -6, 2},
                          {-1, 2, -2, 2, -1}};
    // 3x3 square high-pass, normalizer 4, zero-padded to 5x5.
    const int sq[3][3] = {{-1, 2, -1}, {2, -4, 2}, {-1, 2, -1}};
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) bank.kernels[0][y][x] = kv[y][x] / 12.0;
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) bank.kernels[1][y + 1][x + 1] = sq[y][x] / 4.0;
    // First-order horizontal edge kernel, normalizer 2, zero-padded to 5x5.
    bank.kernels[2][2][2] = -0.5;
    bank.kernels[2][2][3] = 0.5;
    return bank;
}

/// SRM filter responses, one channel per kernel.
struct NoiseResidual {
    int height = 0;
    int width = 0;
    std::vector<real> data;  // 3 * height * width, planar

    NoiseResidual() = default;
    NoiseResidual(int h, int w)
        : height(h), width(w), data(static_cast<std::size_t>(3) * h * w, real(0)) {}

    real& at(int k, int y, int x) {
        return data[(static_cast<std::size_t>(k) * height + y) * width + x];
    }
    real at(int k, int y, int x) const {
        return data[(static_cast<std::size_t>(k) * height + y) * width + x];
    }
};

namespace detail {
// Symmetric (mirror with edge duplication) index.
inline int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}
}  // namespace detail

/// Residual of the rich-model high-pass bank. Each output channel is one
/// kernel convolved with all three input channels and summed. Input
/// intensities are scaled to [0,255] first; with `clamp` set, responses are
/// truncated to [-2,2] and divided by 2 to land in [-1,1].
inline NoiseResidual noise_residual(const Image& x, bool clamp = true) {
    if (x.height < 5 || x.width < 5)
        throw ImageTooSmall("noise_residual needs at least 5x5, got " +
                            std::to_string(x.height) + "x" + std::to_string(x.width));
    static const FilterBank bank = srm_kernels();
    NoiseResidual out(x.height, x.width);
    for (int k = 0; k < 3; ++k) {
        for (int y = 0; y < x.height; ++y) {
            for (int px = 0; px < x.width; ++px) {
                double acc = 0.0;
                for (int dy = -2; dy <= 2; ++dy) {
                    const int sy = detail::reflect(y + dy, x.height);
                    for (int dx = -2; dx <= 2; ++dx) {
                        const double coef = bank.kernels[k][dy + 2][dx + 2];
                        if (coef == 0.0) continue;
                        const int sx = detail::reflect(px + dx, x.width);
                        for (int c = 0; c < 3; ++c)
                            acc += coef * 255.0 * x.at(c, sy, sx);
                    }
                }
                if (clamp) acc = std::clamp(acc, -2.0, 2.0) / 2.0;
                out.at(k, y, px) = static_cast<real>(acc);
            }
        }
    }
    return out;
}

}  // namespace nix
