#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "nix/simulate.hpp"

using namespace nix;
namespace fs = std::filesystem;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
    Image img(h, w);
    Rng rng(seed);
    for (auto& v : img.data) v = static_cast<real>(rng.uniform());
    return img;
}

// Smooth synthetic content so the autoencoder has structure to learn.
Image synthetic_image(int h, int w, std::uint64_t seed) {
    Image img(h, w);
    Rng rng(seed);
    const double fx = rng.uniform(0.5, 2.0), fy = rng.uniform(0.5, 2.0);
    const double phase = rng.uniform(0.0, 6.28);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img.at(c, y, x) = static_cast<real>(
                    0.5 + 0.4 * std::sin(fx * x * 0.2 + fy * y * 0.2 + phase + c));
    return img;
}

double mse(const Image& a, const Image& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        s += d * d;
    }
    return s / static_cast<double>(a.data.size());
}

std::vector<char> read_bytes(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("composite selects per pixel") {
    const Image i = random_image(8, 8, 1);
    const Image g = random_image(8, 8, 2);
    SECTION("mask all zeros keeps the source") {
        BinaryMask m(8, 8);
        const Image x = composite(i, g, m);
        CHECK(x.data == i.data);
    }
    SECTION("mask all ones keeps the reconstruction") {
        BinaryMask m(8, 8);
        for (auto& v : m.data) v = 1;
        const Image x = composite(i, g, m);
        CHECK(x.data == g.data);
    }
    SECTION("checkerboard matches a per-pixel oracle") {
        BinaryMask m(8, 8);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) m.at(y, x) = static_cast<std::uint8_t>((y + x) % 2);
        const Image out = composite(i, g, m);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) {
                    const real expected = m.at(y, x) ? g.at(c, y, x) : i.at(c, y, x);
                    CHECK(out.at(c, y, x) == expected);
                }
    }
    SECTION("shape mismatch") {
        CHECK_THROWS_AS(composite(i, random_image(8, 9, 3), BinaryMask(8, 8)), ShapeMismatch);
    }
}

TEST_CASE("autoencoder training basics") {
    std::vector<Image> images;
    for (int i = 0; i < 16; ++i) images.push_back(synthetic_image(32, 32, static_cast<std::uint64_t>(i)));

    AeTrainConfig cfg;
    cfg.steps = 400;
    cfg.batch_size = 8;
    cfg.seed = 3;
    cfg.base_channels = 8;
    Autoencoder gen(cfg.seed, cfg.base_channels);
    Discriminator disc(cfg.seed + 1, cfg.base_channels);
    const AeTrainResult result = train_autoencoder(images, cfg, gen, disc);

    SECTION("reconstruction loss drops") {
        const double head = std::accumulate(result.rec_loss.begin(), result.rec_loss.begin() + 10, 0.0) / 10.0;
        const double tail = std::accumulate(result.rec_loss.end() - 10, result.rec_loss.end(), 0.0) / 10.0;
        CHECK(tail < head);
    }
    SECTION("reconstruct is deterministic with valid range") {
        const Image a = reconstruct(gen, images[0]);
        const Image b = reconstruct(gen, images[0]);
        CHECK(a.data == b.data);
        CHECK(a.height == 32);
        CHECK(a.width == 32);
        for (real v : a.data) {
            CHECK(v >= real(0));
            CHECK(v <= real(1));
        }
    }
    SECTION("trained model reconstructs better than a fresh one") {
        Autoencoder fresh(99, cfg.base_channels);
        double trained_err = 0, fresh_err = 0;
        for (int i = 0; i < 4; ++i) {
            trained_err += mse(images[static_cast<std::size_t>(i)], reconstruct(gen, images[static_cast<std::size_t>(i)]));
            fresh_err += mse(images[static_cast<std::size_t>(i)], reconstruct(fresh, images[static_cast<std::size_t>(i)]));
        }
        CHECK(trained_err < fresh_err);
    }
}

TEST_CASE("training rejects bad inputs") {
    AeTrainConfig cfg;
    cfg.steps = 1;
    Autoencoder gen(0, 8);
    Discriminator disc(1, 8);
    SECTION("too few images") {
        std::vector<Image> one{synthetic_image(32, 32, 0)};
        CHECK_THROWS_AS(train_autoencoder(one, cfg, gen, disc), EmptyDataset);
    }
    SECTION("mixed sizes") {
        std::vector<Image> mixed{synthetic_image(32, 32, 0), synthetic_image(48, 48, 1)};
        CHECK_THROWS_AS(train_autoencoder(mixed, cfg, gen, disc), ShapeMismatch);
    }
}

TEST_CASE("universal dataset generation") {
    std::vector<Image> images;
    for (int i = 0; i < 10; ++i) images.push_back(synthetic_image(64, 64, 100 + static_cast<std::uint64_t>(i)));
    Autoencoder gen(5, 8);

    const fs::path dir = fs::temp_directory_path() / "nix_test_ut";
    const fs::path dir2 = fs::temp_directory_path() / "nix_test_ut2";
    fs::remove_all(dir);
    fs::remove_all(dir2);

    MaskParams mp;
    mp.seed = 11;
    const DatasetManifest manifest = generate_universal_dataset(images, gen, mp, dir.string(), "d");

    SECTION("manifest cardinality and files") {
        CHECK(manifest.count == 10);
        CHECK(manifest.image_files.size() == 10);
        for (const auto& f : manifest.image_files) CHECK(fs::exists(dir / f));
        for (const auto& f : manifest.mask_files) CHECK(fs::exists(dir / f));
        const Dataset ds = load_dataset(dir.string());
        CHECK(ds.size() == 10);
    }

    SECTION("real regions are preserved bit-exactly") {
        const Dataset ds = load_dataset(dir.string());
        for (std::size_t i = 0; i < ds.size(); ++i)
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < 64; ++y)
                    for (int x = 0; x < 64; ++x)
                        if (ds.masks[i].at(y, x) == 0) {
                            // PNG quantization: compare at byte resolution
                            if (to_byte(ds.images[i].at(c, y, x)) != to_byte(images[i].at(c, y, x)))
                                FAIL("real pixel changed at " << i << "," << c << "," << y << "," << x);
                        }
    }

    SECTION("regeneration from the same seed is byte-identical") {
        generate_universal_dataset(images, gen, mp, dir2.string(), "d");
        for (const auto& f : manifest.image_files)
            CHECK(read_bytes(dir / f) == read_bytes(dir2 / f));
        for (const auto& f : manifest.mask_files)
            CHECK(read_bytes(dir / f) == read_bytes(dir2 / f));
    }

    fs::remove_all(dir);
    fs::remove_all(dir2);
}
