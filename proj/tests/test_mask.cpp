#include <catch_amalgamated.hpp>

#include <filesystem>

#include "nix/mask.hpp"

using namespace nix;

TEST_CASE("generated mask coverage lands in the configured range") {
    MaskParams p;
    p.seed = 7;
    const BinaryMask m = random_irregular_mask(256, 256, p);
    const double cov = mask_coverage(m);
    CHECK(cov >= 0.05);
    CHECK(cov <= 0.5);
    for (std::uint8_t v : m.data) CHECK((v == 0 || v == 1));
}

TEST_CASE("same parameters give bit-identical masks") {
    MaskParams p;
    p.seed = 7;
    const BinaryMask a = random_irregular_mask(256, 256, p);
    const BinaryMask b = random_irregular_mask(256, 256, p);
    CHECK(a.data == b.data);
}

TEST_CASE("coverage stays in range across many seeds") {
    MaskParams p;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        p.seed = seed;
        const BinaryMask m = random_irregular_mask(64, 64, p);
        const double cov = mask_coverage(m);
        CHECK(cov >= p.min_coverage);
        CHECK(cov <= p.max_coverage);
    }
}

TEST_CASE("small dimensions are rejected") {
    CHECK_THROWS_AS(random_irregular_mask(16, 16, MaskParams{}), InvalidDimensions);
    CHECK_THROWS_AS(random_irregular_mask(64, 16, MaskParams{}), InvalidDimensions);
}

TEST_CASE("composite convention flips polarity") {
    BinaryMask m(8, 8);
    SECTION("all ones becomes all zeros") {
        for (auto& v : m.data) v = 1;
        const BinaryMask c = to_composite_convention(m);
        for (auto v : c.data) CHECK(v == 0);
    }
    SECTION("involution") {
        m.at(3, 4) = 1;
        m.at(0, 0) = 1;
        CHECK(to_composite_convention(to_composite_convention(m)).data == m.data);
    }
    SECTION("pointwise complement") {
        m.at(3, 4) = 1;
        const BinaryMask c = to_composite_convention(m);
        CHECK(c.at(3, 4) == 0);
        int ones = 0;
        for (auto v : c.data) ones += v;
        CHECK(ones == 63);
    }
}

TEST_CASE("mask_coverage counts pixels") {
    BinaryMask m(8, 8);
    CHECK(mask_coverage(m) == 0.0);
    for (int i = 0; i < 16; ++i) m.data[static_cast<std::size_t>(i)] = 1;
    CHECK(mask_coverage(m) == 0.25);
    for (auto& v : m.data) v = 1;
    CHECK(mask_coverage(m) == 1.0);
}

TEST_CASE("mask PNG round trip") {
    MaskParams p;
    p.seed = 42;
    const BinaryMask m = random_irregular_mask(64, 64, p);
    const auto path = std::filesystem::temp_directory_path() / "nix_test_mask.png";
    save_mask(path.string(), m);
    const BinaryMask back = load_mask(path.string());
    CHECK(back.data == m.data);
    std::filesystem::remove(path);
}
