#include <catch_amalgamated.hpp>

#include "nix/nixnet.hpp"

using namespace nix;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
    Image img(h, w);
    Rng rng(seed);
    for (auto& v : img.data) v = static_cast<real>(rng.uniform());
    return img;
}

}  // namespace

TEST_CASE("forward produces a full-resolution probability map") {
    NixNetConfig cfg;
    cfg.init_seed = 1;
    NixNet model(cfg);
    const Image img = random_image(64, 64, 2);
    const ProbabilityMap p = model.forward(img);
    CHECK(p.height == 64);
    CHECK(p.width == 64);
    for (real v : p.data) {
        CHECK(v >= real(0));
        CHECK(v <= real(1));
    }
}

TEST_CASE("pyramid shapes follow the 1/2 1/4 1/8 contract") {
    nn::ParamStore store;
    Rng rng(0);
    net::FeatureStream stream(store, "s", rng);
    nn::Ctx ctx{false};
    const Image img = random_image(64, 64, 3);
    auto x = nn::make_leaf(NixNet::image_batch({&img}));
    const net::Pyramid p = stream(ctx, x);
    CHECK(p.l1->value.shape() == std::vector<int>{1, 128, 32, 32});
    CHECK(p.l2->value.shape() == std::vector<int>{1, 256, 16, 16});
    CHECK(p.l3->value.shape() == std::vector<int>{1, 512, 8, 8});

    net::FusionModule fusion(store, "f", rng);
    const net::Pyramid fused = fusion(ctx, p);
    CHECK(fused.l1->value.shape() == p.l1->value.shape());
    CHECK(fused.l2->value.shape() == p.l2->value.shape());
    CHECK(fused.l3->value.shape() == p.l3->value.shape());

    net::CrossConcat cross(store, "c", rng);
    const net::Pyramid psi = cross(ctx, p, fused);
    CHECK(psi.l1->value.shape() == std::vector<int>{1, 128, 32, 32});
    CHECK(psi.l2->value.shape() == std::vector<int>{1, 256, 16, 16});
    CHECK(psi.l3->value.shape() == std::vector<int>{1, 512, 8, 8});
}

TEST_CASE("fusion propagates information across scales") {
    nn::ParamStore store;
    Rng rng(1);
    net::FusionModule fusion(store, "f", rng);
    nn::Ctx ctx{false};
    // only level 1 carries signal; levels 2 and 3 are zero
    Tensor l1({1, 128, 16, 16});
    Rng data_rng(2);
    for (std::size_t i = 0; i < l1.size(); ++i) l1[i] = static_cast<real>(data_rng.uniform());
    net::Pyramid p{nn::make_leaf(std::move(l1)), nn::make_leaf(Tensor({1, 256, 8, 8})),
                   nn::make_leaf(Tensor({1, 512, 4, 4}))};
    const net::Pyramid out = fusion(ctx, p);
    auto max_abs = [](const Tensor& t) {
        real m = 0;
        for (std::size_t i = 0; i < t.size(); ++i) m = std::max(m, std::abs(t[i]));
        return m;
    };
    CHECK(max_abs(out.l2->value) > real(0));
    CHECK(max_abs(out.l3->value) > real(0));
}

TEST_CASE("cross concat rejects mismatched pyramids") {
    nn::ParamStore store;
    Rng rng(1);
    net::CrossConcat cross(store, "c", rng);
    nn::Ctx ctx{false};
    net::Pyramid a{nn::make_leaf(Tensor({1, 128, 16, 16})), nn::make_leaf(Tensor({1, 256, 8, 8})),
                   nn::make_leaf(Tensor({1, 512, 4, 4}))};
    net::Pyramid b{nn::make_leaf(Tensor({1, 128, 8, 8})), nn::make_leaf(Tensor({1, 256, 8, 8})),
                   nn::make_leaf(Tensor({1, 512, 4, 4}))};
    CHECK_THROWS_AS(cross(ctx, a, b), ShapeMismatch);
}

TEST_CASE("bad input sizes are rejected") {
    NixNetConfig cfg;
    cfg.init_seed = 1;
    NixNet model(cfg);
    CHECK_THROWS_AS(model.forward(random_image(100, 100, 1)), BadInputSize);
    CHECK_THROWS_AS(model.forward(random_image(24, 24, 1)), BadInputSize);
}

TEST_CASE("both streams disabled is invalid") {
    NixNetConfig cfg;
    cfg.enable_image_stream = false;
    cfg.enable_noise_stream = false;
    CHECK_THROWS_AS(NixNet{cfg}, ConfigInvalid);
}

TEST_CASE("all ablation variants construct and run") {
    const Image img = random_image(64, 64, 7);
    struct Variant {
        const char* name;
        bool img_s, noise_s, f12, f3;
    };
    const Variant variants[] = {
        {"full", true, true, true, true},
        {"wo_noise_stream", true, false, true, true},
        {"wo_image_stream", false, true, true, true},
        {"wo_all_fusion", true, true, false, false},
        {"wo_fusion_12", true, true, false, true},
        {"wo_fusion_3", true, true, true, false},
    };
    for (const auto& v : variants) {
        INFO(v.name);
        NixNetConfig cfg;
        cfg.enable_image_stream = v.img_s;
        cfg.enable_noise_stream = v.noise_s;
        cfg.enable_fusion_12 = v.f12;
        cfg.enable_fusion_3 = v.f3;
        cfg.init_seed = 1;
        NixNet model(cfg);
        const ProbabilityMap p = model.forward(img);
        CHECK(p.height == 64);
        for (real pv : p.data) {
            CHECK(pv >= real(0));
            CHECK(pv <= real(1));
        }
    }
}

TEST_CASE("inference is deterministic") {
    NixNetConfig cfg;
    cfg.init_seed = 9;
    NixNet model(cfg);
    const Image img = random_image(64, 64, 4);
    const ProbabilityMap a = model.forward(img);
    const ProbabilityMap b = model.forward(img);
    CHECK(a.data == b.data);
}

TEST_CASE("describe lists parameter shapes") {
    NixNetConfig cfg;
    cfg.init_seed = 1;
    NixNet model(cfg);
    const std::string d = model.describe();
    CHECK(d.find("image_stream.block1") != std::string::npos);
    CHECK(d.find("head.out") != std::string::npos);
}
