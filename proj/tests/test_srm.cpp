#include <catch_amalgamated.hpp>

#include <cmath>

#include "nix/rng.hpp"
#include "nix/srm.hpp"

using namespace nix;

namespace {

// Independent nested-loop filtering oracle (symmetric padding, no clamp).
int reflect_idx(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

double oracle_response(const Image& img, const FilterBank& bank, int k, int y, int x) {
    double acc = 0.0;
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx)
            for (int c = 0; c < 3; ++c)
                acc += static_cast<double>(bank.kernels[static_cast<std::size_t>(k)]
                                                       [static_cast<std::size_t>(dy + 2)]
                                                       [static_cast<std::size_t>(dx + 2)]) *
                       255.0 * img.at(c, reflect_idx(y + dy, img.height), reflect_idx(x + dx, img.width));
    return acc;
}

Image random_image(int h, int w, std::uint64_t seed) {
    Image img(h, w);
    Rng rng(seed);
    for (auto& v : img.data) v = static_cast<real>(rng.uniform());
    return img;
}

}  // namespace

TEST_CASE("filter bank has three 5x5 zero-sum kernels") {
    const FilterBank bank = srm_kernels();
    for (int k = 0; k < 3; ++k) {
        double sum = 0;
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 5; ++x)
                sum += bank.kernels[static_cast<std::size_t>(k)][static_cast<std::size_t>(y)]
                                   [static_cast<std::size_t>(x)];
        CHECK(std::abs(sum) < 1e-9);
    }
    // KV kernel, center -12 with normalizer 12
    CHECK(bank.kernels[0][2][2] == -1.0);
    CHECK(bank.kernels[0][0][0] == -1.0 / 12.0);
    // square kernel, center -4/4
    CHECK(bank.kernels[1][2][2] == -1.0);
    CHECK(bank.kernels[1][0][0] == 0.0);
    // first-order edge kernel
    CHECK(bank.kernels[2][2][2] == -0.5);
    CHECK(bank.kernels[2][2][3] == 0.5);
}

TEST_CASE("constant image gives zero residual") {
    Image img(16, 16);
    for (auto& v : img.data) v = real(0.5);
    const NoiseResidual r = noise_residual(img);
    for (real v : r.data) CHECK(std::abs(v) < 1e-6);
}

TEST_CASE("impulse response equals the flipped kernel") {
    Image img(17, 17);
    for (int c = 0; c < 3; ++c) img.at(c, 8, 8) = real(1) / real(255);
    const NoiseResidual r = noise_residual(img, /*clamp=*/false);
    const FilterBank bank = srm_kernels();
    for (int k = 0; k < 3; ++k)
        for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx) {
                // out(8-dy, 8-dx) picks kernel entry (dy, dx), i.e. the flip
                const double expected =
                    3.0 * bank.kernels[static_cast<std::size_t>(k)]
                                      [static_cast<std::size_t>(dy + 2)][static_cast<std::size_t>(dx + 2)];
                CHECK(std::abs(r.at(k, 8 - dy, 8 - dx) - expected) < 1e-5);
            }
}

TEST_CASE("matches the nested-loop oracle on random input") {
    const Image img = random_image(16, 16, 123);
    const NoiseResidual r = noise_residual(img, /*clamp=*/false);
    const FilterBank bank = srm_kernels();
    for (int k = 0; k < 3; ++k)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                CHECK(std::abs(r.at(k, y, x) - oracle_response(img, bank, k, y, x)) < 1e-3);
}

TEST_CASE("linearity without clamping") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Image a = random_image(16, 16, seed * 2 + 1);
        const Image b = random_image(16, 16, seed * 2 + 2);
        Image mix(16, 16);
        const real ca = real(0.3), cb = real(0.6);
        for (std::size_t i = 0; i < mix.data.size(); ++i)
            mix.data[i] = ca * a.data[i] + cb * b.data[i];
        const NoiseResidual ra = noise_residual(a, false);
        const NoiseResidual rb = noise_residual(b, false);
        const NoiseResidual rm = noise_residual(mix, false);
        for (std::size_t i = 0; i < rm.data.size(); ++i)
            CHECK(std::abs(rm.data[i] - (ca * ra.data[i] + cb * rb.data[i])) < 1e-3);
    }
}

TEST_CASE("clamped output stays in [-1,1]") {
    const Image img = random_image(16, 16, 9);
    const NoiseResidual r = noise_residual(img);
    for (real v : r.data) {
        CHECK(v >= real(-1));
        CHECK(v <= real(1));
    }
}

TEST_CASE("images smaller than the kernel are rejected") {
    CHECK_THROWS_AS(noise_residual(Image(4, 16)), ImageTooSmall);
}
