#include <catch_amalgamated.hpp>

#include <filesystem>

#include "nix/autoencoder.hpp"
#include "nix/nixnet.hpp"

using namespace nix;
namespace fs = std::filesystem;

namespace {
Image random_image(int h, int w, std::uint64_t seed) {
    Image img(h, w);
    Rng rng(seed);
    for (auto& v : img.data) v = static_cast<real>(rng.uniform());
    return img;
}
}  // namespace

TEST_CASE("nixnet checkpoint round trip preserves outputs and config") {
    NixNetConfig cfg;
    cfg.init_seed = 21;
    cfg.enable_fusion_3 = false;
    NixNet model(cfg);
    const Image img = random_image(64, 64, 1);
    const ProbabilityMap before = model.forward(img);

    const auto path = fs::temp_directory_path() / "nix_test_ckpt.bin";
    model.save(path.string());

    auto loaded = NixNet::load(path.string());
    CHECK(loaded->config().enable_fusion_3 == false);
    CHECK(loaded->config().init_seed == 21);
    const ProbabilityMap after = loaded->forward(img);
    CHECK(after.data == before.data);

    SECTION("digest is stable across identical saves") {
        const auto path2 = fs::temp_directory_path() / "nix_test_ckpt2.bin";
        model.save(path2.string());
        CHECK(nn::file_digest(path.string()) == nn::file_digest(path2.string()));
        fs::remove(path2);
    }
    fs::remove(path);
}

TEST_CASE("autoencoder checkpoint round trip") {
    Autoencoder gen(3, 8);
    const Image img = random_image(32, 32, 2);
    const Image before = reconstruct(gen, img);

    const auto path = fs::temp_directory_path() / "nix_test_ae.bin";
    gen.save(path.string());
    auto loaded = Autoencoder::load(path.string());
    const Image after = reconstruct(*loaded, img);
    CHECK(after.data == before.data);

    SECTION("loading a wrong checkpoint type fails") {
        CHECK_THROWS_AS(NixNet::load(path.string()), std::exception);
    }
    fs::remove(path);
}
