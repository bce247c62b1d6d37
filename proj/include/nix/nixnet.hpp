#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nix/image.hpp"
#include "nix/nn/adam.hpp"
#include "nix/nn/checkpoint.hpp"
#include "nix/nn/layers.hpp"
#include "nix/probability_map.hpp"
#include "nix/srm.hpp"

namespace nix {

struct NixNetConfig {
    bool enable_image_stream = true;
    bool enable_noise_stream = true;
    bool enable_fusion_12 = true;
    bool enable_fusion_3 = true;
    int head_channels = 64;
    std::uint64_t init_seed = 0;
};

inline void to_json(nlohmann::json& j, const NixNetConfig& c) {
    j = nlohmann::json{{"enable_image_stream", c.enable_image_stream},
                       {"enable_noise_stream", c.enable_noise_stream},
                       {"enable_fusion_12", c.enable_fusion_12},
                       {"enable_fusion_3", c.enable_fusion_3},
                       {"head_channels", c.head_channels},
                       {"init_seed", c.init_seed}};
}

inline void from_json(const nlohmann::json& j, NixNetConfig& c) {
    j.at("enable_image_stream").get_to(c.enable_image_stream);
    j.at("enable_noise_stream").get_to(c.enable_noise_stream);
    j.at("enable_fusion_12").get_to(c.enable_fusion_12);
    j.at("enable_fusion_3").get_to(c.enable_fusion_3);
    j.at("head_channels").get_to(c.head_channels);
    j.at("init_seed").get_to(c.init_seed);
}

namespace net {

using nn::Ctx;
using nn::NodeRef;

/// Feature maps at 1/2, 1/4, 1/8 of the input size with 128/256/512 channels.
struct Pyramid {
    NodeRef l1, l2, l3;
};

inline constexpr int kPyramidChannels[3] = {128, 256, 512};

/// Pre-activation residual unit; the optional stride sits on the last
/// convolution, with a matching 1x1 projection on the skip path.
struct PreActUnit {
    nn::BatchNorm2d bn1, bn2;
    nn::Conv2d conv1, conv2;
    std::optional<nn::Conv2d> proj;

    PreActUnit() = default;
    PreActUnit(nn::ParamStore& store, const std::string& name, Rng& rng, int c_in, int c_out,
               int stride) {
        bn1 = nn::BatchNorm2d(store, name + ".bn1", c_in);
        conv1 = nn::Conv2d(store, name + ".conv1", rng, c_in, c_out, 3, 1);
        bn2 = nn::BatchNorm2d(store, name + ".bn2", c_out);
        conv2 = nn::Conv2d(store, name + ".conv2", rng, c_out, c_out, 3, stride);
        if (c_in != c_out || stride != 1)
            proj = nn::Conv2d(store, name + ".proj", rng, c_in, c_out, 1, stride);
    }

    NodeRef operator()(Ctx& ctx, const NodeRef& x) {
        auto h = conv2(nn::relu(bn2(ctx, conv1(nn::relu(bn1(ctx, x))))));
        auto skip = proj ? (*proj)(x) : x;
        return nn::add(h, skip);
    }
};

/// Two pre-activation units; the second one halves the spatial size.
struct ResNetBlock {
    PreActUnit unit1, unit2;

    ResNetBlock() = default;
    ResNetBlock(nn::ParamStore& store, const std::string& name, Rng& rng, int c_in, int c_out)
        : unit1(store, name + ".unit1", rng, c_in, c_out, 1),
          unit2(store, name + ".unit2", rng, c_out, c_out, 2) {}

    NodeRef operator()(Ctx& ctx, const NodeRef& x) { return unit2(ctx, unit1(ctx, x)); }
};

/// Three sequential ResNet blocks producing the 1/2, 1/4, 1/8 pyramid.
struct FeatureStream {
    ResNetBlock block1, block2, block3;

    FeatureStream() = default;
    FeatureStream(nn::ParamStore& store, const std::string& name, Rng& rng)
        : block1(store, name + ".block1", rng, 3, kPyramidChannels[0]),
          block2(store, name + ".block2", rng, kPyramidChannels[0], kPyramidChannels[1]),
          block3(store, name + ".block3", rng, kPyramidChannels[1], kPyramidChannels[2]) {}

    Pyramid operator()(Ctx& ctx, const NodeRef& x) {
        Pyramid p;
        p.l1 = block1(ctx, x);
        p.l2 = block2(ctx, p.l1);
        p.l3 = block3(ctx, p.l2);
        return p;
    }
};

/// Exchange unit: every output level is the sum of identity / upsampled /
/// downsampled transforms of all three input levels, followed by ReLU.
/// Coarser-to-finer paths are bilinear upsampling plus 1x1 convolution;
/// finer-to-coarser paths are stride-2 3x3 convolutions chained once per
/// halving.
struct FusionModule {
    // down[i]: single-step stride-2 conv from level i to i+1 channels (i = 0,1)
    nn::Conv2d down12, down23, down13a, down13b;
    nn::BatchNorm2d bn_down12, bn_down23, bn_down13a, bn_down13b;
    // up: 1x1 conv after bilinear upsample
    nn::Conv2d up21, up31, up32;
    nn::BatchNorm2d bn_up21, bn_up31, bn_up32;

    FusionModule() = default;
    FusionModule(nn::ParamStore& store, const std::string& name, Rng& rng) {
        const int c1 = kPyramidChannels[0], c2 = kPyramidChannels[1], c3 = kPyramidChannels[2];
        down12 = nn::Conv2d(store, name + ".down12", rng, c1, c2, 3, 2);
        bn_down12 = nn::BatchNorm2d(store, name + ".bn_down12", c2);
        down23 = nn::Conv2d(store, name + ".down23", rng, c2, c3, 3, 2);
        bn_down23 = nn::BatchNorm2d(store, name + ".bn_down23", c3);
        down13a = nn::Conv2d(store, name + ".down13a", rng, c1, c2, 3, 2);
        bn_down13a = nn::BatchNorm2d(store, name + ".bn_down13a", c2);
        down13b = nn::Conv2d(store, name + ".down13b", rng, c2, c3, 3, 2);
        bn_down13b = nn::BatchNorm2d(store, name + ".bn_down13b", c3);
        up21 = nn::Conv2d(store, name + ".up21", rng, c2, c1, 1, 1);
        bn_up21 = nn::BatchNorm2d(store, name + ".bn_up21", c1);
        up31 = nn::Conv2d(store, name + ".up31", rng, c3, c1, 1, 1);
        bn_up31 = nn::BatchNorm2d(store, name + ".bn_up31", c1);
        up32 = nn::Conv2d(store, name + ".up32", rng, c3, c2, 1, 1);
        bn_up32 = nn::BatchNorm2d(store, name + ".bn_up32", c2);
    }

    Pyramid operator()(Ctx& ctx, const Pyramid& p) {
        Pyramid out;
        out.l1 = nn::relu(nn::add(
            p.l1, nn::add(bn_up21(ctx, up21(nn::upsample_bilinear(p.l2, 2))),
                          bn_up31(ctx, up31(nn::upsample_bilinear(p.l3, 4))))));
        out.l2 = nn::relu(nn::add(
            p.l2, nn::add(bn_down12(ctx, down12(p.l1)),
                          bn_up32(ctx, up32(nn::upsample_bilinear(p.l3, 2))))));
        auto cascade = bn_down13b(
            ctx, down13b(nn::relu(bn_down13a(ctx, down13a(p.l1)))));
        out.l3 = nn::relu(nn::add(p.l3, nn::add(bn_down23(ctx, down23(p.l2)), cascade)));
        return out;
    }
};

/// Per-level channel concatenation of the two streams followed by a Conv
/// block projecting back to the pyramid widths.
struct CrossConcat {
    nn::ConvBlock block1, block2, block3;

    CrossConcat() = default;
    CrossConcat(nn::ParamStore& store, const std::string& name, Rng& rng)
        : block1(store, name + ".level1", rng, 2 * kPyramidChannels[0], kPyramidChannels[0]),
          block2(store, name + ".level2", rng, 2 * kPyramidChannels[1], kPyramidChannels[1]),
          block3(store, name + ".level3", rng, 2 * kPyramidChannels[2], kPyramidChannels[2]) {}

    Pyramid operator()(Ctx& ctx, const Pyramid& img, const Pyramid& noise) {
        Pyramid out;
        out.l1 = block1(ctx, nn::concat_channels({img.l1, noise.l1}));
        out.l2 = block2(ctx, nn::concat_channels({img.l2, noise.l2}));
        out.l3 = block3(ctx, nn::concat_channels({img.l3, noise.l3}));
        return out;
    }
};

/// Upsamples the coarser levels to 1/2 scale, concatenates, projects through
/// a Conv block, upsamples to full resolution and applies a sigmoid.
struct MaskHead {
    nn::ConvBlock block;
    nn::Conv2d out_conv;

    MaskHead() = default;
    MaskHead(nn::ParamStore& store, const std::string& name, Rng& rng, int head_channels)
        : block(store, name + ".block", rng,
                kPyramidChannels[0] + kPyramidChannels[1] + kPyramidChannels[2], head_channels),
          out_conv(store, name + ".out", rng, head_channels, 1, 1, 1) {}

    NodeRef operator()(Ctx& ctx, const Pyramid& p) {
        auto cat = nn::concat_channels(
            {p.l1, nn::upsample_bilinear(p.l2, 2), nn::upsample_bilinear(p.l3, 4)});
        return nn::sigmoid(out_conv(nn::upsample_bilinear(block(ctx, cat), 2)));
    }
};

}  // namespace net

/// The two-stream multi-scale detector. Ablated modules are simply not
/// constructed; disabled fusion stages act as identity so downstream shapes
/// are unchanged.
class NixNet {
public:
    explicit NixNet(const NixNetConfig& cfg) : cfg_(cfg) {
        if (!cfg.enable_image_stream && !cfg.enable_noise_stream)
            throw ConfigInvalid("at least one stream must be enabled");
        Rng rng(cfg.init_seed);
        if (cfg.enable_image_stream)
            image_stream_ = net::FeatureStream(store_, "image_stream", rng);
        if (cfg.enable_noise_stream)
            noise_stream_ = net::FeatureStream(store_, "noise_stream", rng);
        if (cfg.enable_fusion_12) {
            if (cfg.enable_image_stream) fusion1_ = net::FusionModule(store_, "fusion1", rng);
            if (cfg.enable_noise_stream) fusion2_ = net::FusionModule(store_, "fusion2", rng);
        }
        if (cfg.enable_image_stream && cfg.enable_noise_stream)
            cross_ = net::CrossConcat(store_, "cross", rng);
        if (cfg.enable_fusion_3) fusion3_ = net::FusionModule(store_, "fusion3", rng);
        head_ = net::MaskHead(store_, "head", rng, cfg.head_channels);
    }

    const NixNetConfig& config() const { return cfg_; }
    nn::ParamStore& store() { return store_; }
    const nn::ParamStore& store() const { return store_; }

    static void check_input_size(int h, int w) {
        if (h < 32 || w < 32 || h % 8 != 0 || w % 8 != 0)
            throw BadInputSize("input size must be >= 32 and divisible by 8, got " +
                               std::to_string(h) + "x" + std::to_string(w));
    }

    /// img, residual: [N,3,H,W] (residual may be empty when the noise stream
    /// is disabled). Returns [N,1,H,W] probabilities.
    nn::NodeRef forward_batch(nn::Ctx& ctx, const nn::NodeRef& img,
                              const nn::NodeRef& residual) {
        const auto& ref = cfg_.enable_image_stream ? img : residual;
        check_input_size(ref->value.dim(2), ref->value.dim(3));
        std::optional<net::Pyramid> pi, pn;
        if (cfg_.enable_image_stream) {
            pi = (*image_stream_)(ctx, img);
            if (fusion1_) pi = (*fusion1_)(ctx, *pi);
        }
        if (cfg_.enable_noise_stream) {
            pn = (*noise_stream_)(ctx, residual);
            if (fusion2_) pn = (*fusion2_)(ctx, *pn);
        }
        net::Pyramid fused;
        if (pi && pn)
            fused = (*cross_)(ctx, *pi, *pn);
        else
            fused = pi ? *pi : *pn;
        if (fusion3_) fused = (*fusion3_)(ctx, fused);
        return (*head_)(ctx, fused);
    }

    /// Single-image inference; computes the SRM residual internally.
    ProbabilityMap forward(const Image& x) {
        check_input_size(x.height, x.width);
        nn::Ctx ctx{false};
        auto img = nn::make_leaf(image_batch({&x}));
        nn::NodeRef res;
        if (cfg_.enable_noise_stream) {
            const NoiseResidual r = noise_residual(x);
            res = nn::make_leaf(residual_batch({&r}));
        }
        auto p = forward_batch(ctx, img, res);
        ProbabilityMap out(x.height, x.width);
        std::copy(p->value.data(), p->value.data() + out.data.size(), out.data.begin());
        return out;
    }

    static Tensor image_batch(const std::vector<const Image*>& images) {
        const int h = images[0]->height, w = images[0]->width;
        Tensor t({static_cast<int>(images.size()), 3, h, w});
        const std::size_t item = static_cast<std::size_t>(3) * h * w;
        for (std::size_t i = 0; i < images.size(); ++i) {
            if (images[i]->height != h || images[i]->width != w)
                throw ShapeMismatch("image batch has mixed sizes");
            std::copy(images[i]->data.begin(), images[i]->data.end(), t.data() + i * item);
        }
        return t;
    }

    static Tensor residual_batch(const std::vector<const NoiseResidual*>& residuals) {
        const int h = residuals[0]->height, w = residuals[0]->width;
        Tensor t({static_cast<int>(residuals.size()), 3, h, w});
        const std::size_t item = static_cast<std::size_t>(3) * h * w;
        for (std::size_t i = 0; i < residuals.size(); ++i)
            std::copy(residuals[i]->data.begin(), residuals[i]->data.end(), t.data() + i * item);
        return t;
    }

    void save(const std::string& path) const {
        nn::save_checkpoint(path, store_, nlohmann::json(cfg_));
    }

    static std::unique_ptr<NixNet> load(const std::string& path) {
        const NixNetConfig cfg = nn::read_checkpoint_config(path).get<NixNetConfig>();
        auto model = std::make_unique<NixNet>(cfg);
        nn::load_checkpoint(path, model->store_);
        return model;
    }

    /// Layer-by-layer shape listing for audit.
    std::string describe() const {
        std::string out;
        for (const auto& [name, tensor] : store_.blobs) {
            out += name + " [";
            for (int d = 0; d < tensor->ndim(); ++d)
                out += (d ? "x" : "") + std::to_string(tensor->dim(d));
            out += "]\n";
        }
        return out;
    }

private:
    NixNetConfig cfg_;
    nn::ParamStore store_;
    std::optional<net::FeatureStream> image_stream_, noise_stream_;
    std::optional<net::FusionModule> fusion1_, fusion2_, fusion3_;
    std::optional<net::CrossConcat> cross_;
    std::optional<net::MaskHead> head_;
};

}  // namespace nix
