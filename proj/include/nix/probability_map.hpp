#pragma once

#include <vector>

#include "nix/common.hpp"

namespace nix {

/// Per-pixel prediction in [0,1], 1 = inpainted.
struct ProbabilityMap {
    int height = 0;
    int width = 0;
    std::vector<real> data;

    ProbabilityMap() = default;
    ProbabilityMap(int h, int w)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w, real(0)) {}

    real& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    real at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

}  // namespace nix
