#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nix/image.hpp"
#include "nix/nn/adam.hpp"
#include "nix/nn/checkpoint.hpp"
#include "nix/nn/layers.hpp"

namespace nix {

/// Reconstruction autoencoder G: four stride-2 downsampling stages to a
/// bottleneck and four upsampling stages back, no skip connections, so the
/// output carries the generator's own noise characteristics rather than the
/// input's.
class Autoencoder {
public:
    explicit Autoencoder(std::uint64_t init_seed = 0, int base_channels = 32)
        : init_seed_(init_seed), base_(base_channels) {
        Rng rng(init_seed);
        const int c1 = base_, c2 = 2 * base_, c3 = 4 * base_, c4 = 8 * base_;
        enc1_ = nn::Conv2d(store_, "enc1", rng, 3, c1, 3, 2);
        ebn1_ = nn::BatchNorm2d(store_, "ebn1", c1);
        enc2_ = nn::Conv2d(store_, "enc2", rng, c1, c2, 3, 2);
        ebn2_ = nn::BatchNorm2d(store_, "ebn2", c2);
        enc3_ = nn::Conv2d(store_, "enc3", rng, c2, c3, 3, 2);
        ebn3_ = nn::BatchNorm2d(store_, "ebn3", c3);
        enc4_ = nn::Conv2d(store_, "enc4", rng, c3, c4, 3, 2);
        ebn4_ = nn::BatchNorm2d(store_, "ebn4", c4);
        dec1_ = nn::Conv2d(store_, "dec1", rng, c4, c3, 3, 1);
        dbn1_ = nn::BatchNorm2d(store_, "dbn1", c3);
        dec2_ = nn::Conv2d(store_, "dec2", rng, c3, c2, 3, 1);
        dbn2_ = nn::BatchNorm2d(store_, "dbn2", c2);
        dec3_ = nn::Conv2d(store_, "dec3", rng, c2, c1, 3, 1);
        dbn3_ = nn::BatchNorm2d(store_, "dbn3", c1);
        dec4_ = nn::Conv2d(store_, "dec4", rng, c1, c1, 3, 1);
        dbn4_ = nn::BatchNorm2d(store_, "dbn4", c1);
        out_ = nn::Conv2d(store_, "out", rng, c1, 3, 3, 1);
    }

    nn::NodeRef operator()(nn::Ctx& ctx, const nn::NodeRef& x) {
        auto h = nn::relu(ebn1_(ctx, enc1_(x)));
        h = nn::relu(ebn2_(ctx, enc2_(h)));
        h = nn::relu(ebn3_(ctx, enc3_(h)));
        h = nn::relu(ebn4_(ctx, enc4_(h)));
        h = nn::relu(dbn1_(ctx, dec1_(nn::upsample_bilinear(h, 2))));
        h = nn::relu(dbn2_(ctx, dec2_(nn::upsample_bilinear(h, 2))));
        h = nn::relu(dbn3_(ctx, dec3_(nn::upsample_bilinear(h, 2))));
        h = nn::relu(dbn4_(ctx, dec4_(nn::upsample_bilinear(h, 2))));
        return nn::sigmoid(out_(h));
    }

    nn::ParamStore& store() { return store_; }
    int base_channels() const { return base_; }
    std::uint64_t init_seed() const { return init_seed_; }

    void save(const std::string& path) const {
        nn::save_checkpoint(path, store_,
                            nlohmann::json{{"type", "autoencoder"},
                                           {"base_channels", base_},
                                           {"init_seed", init_seed_}});
    }

    static std::unique_ptr<Autoencoder> load(const std::string& path) {
        const auto cfg = nn::read_checkpoint_config(path);
        if (cfg.value("type", "") != "autoencoder")
            throw IoError("not an autoencoder checkpoint: " + path);
        auto m = std::make_unique<Autoencoder>(cfg.value("init_seed", std::uint64_t(0)),
                                               cfg.value("base_channels", 32));
        nn::load_checkpoint(path, m->store_);
        return m;
    }

private:
    std::uint64_t init_seed_;
    int base_;
    nn::ParamStore store_;
    nn::Conv2d enc1_, enc2_, enc3_, enc4_, dec1_, dec2_, dec3_, dec4_, out_;
    nn::BatchNorm2d ebn1_, ebn2_, ebn3_, ebn4_, dbn1_, dbn2_, dbn3_, dbn4_;
};

/// Global real/fake classifier D: four stride-2 stages, global pooling and a
/// sigmoid scalar per image.
class Discriminator {
public:
    explicit Discriminator(std::uint64_t init_seed = 1, int base_channels = 32)
        : base_(base_channels) {
        Rng rng(init_seed);
        const int c1 = base_, c2 = 2 * base_, c3 = 4 * base_, c4 = 8 * base_;
        conv1_ = nn::Conv2d(store_, "conv1", rng, 3, c1, 3, 2);
        conv2_ = nn::Conv2d(store_, "conv2", rng, c1, c2, 3, 2);
        bn2_ = nn::BatchNorm2d(store_, "bn2", c2);
        conv3_ = nn::Conv2d(store_, "conv3", rng, c2, c3, 3, 2);
        bn3_ = nn::BatchNorm2d(store_, "bn3", c3);
        conv4_ = nn::Conv2d(store_, "conv4", rng, c3, c4, 3, 2);
        bn4_ = nn::BatchNorm2d(store_, "bn4", c4);
        fc_ = nn::Conv2d(store_, "fc", rng, c4, 1, 1, 1);
    }

    /// Returns [N,1,1,1] real-probabilities in (0,1).
    nn::NodeRef operator()(nn::Ctx& ctx, const nn::NodeRef& x) {
        auto h = nn::relu(conv1_(x));
        h = nn::relu(bn2_(ctx, conv2_(h)));
        h = nn::relu(bn3_(ctx, conv3_(h)));
        h = nn::relu(bn4_(ctx, conv4_(h)));
        return nn::sigmoid(fc_(nn::global_avg_pool(h)));
    }

    nn::ParamStore& store() { return store_; }

private:
    int base_;
    nn::ParamStore store_;
    nn::Conv2d conv1_, conv2_, conv3_, conv4_, fc_;
    nn::BatchNorm2d bn2_, bn3_, bn4_;
};

struct AeTrainConfig {
    double lambda = 0.1;  // reconstruction trade-off
    real learning_rate = real(2e-4);
    real beta1 = real(0.5);
    int steps = 400;
    int batch_size = 8;
    std::uint64_t seed = 0;
    int base_channels = 32;
};

struct AeTrainResult {
    std::vector<double> gen_loss;   // adversarial + lambda * rec, per step
    std::vector<double> rec_loss;   // reconstruction term, per step
    std::vector<double> disc_loss;  // discriminator BCE, per step
};

namespace detail {
inline Tensor batch_from_images(const std::vector<Image>& images, const std::vector<int>& idx) {
    const int h = images[0].height, w = images[0].width;
    Tensor t({static_cast<int>(idx.size()), 3, h, w});
    const std::size_t item = static_cast<std::size_t>(3) * h * w;
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy(images[static_cast<std::size_t>(idx[i])].data.begin(),
                  images[static_cast<std::size_t>(idx[i])].data.end(), t.data() + i * item);
    return t;
}
}  // namespace detail

/// Alternating GAN updates: the discriminator minimizes the real/fake BCE,
/// the generator minimizes the non-saturating adversarial term plus
/// lambda * MSE reconstruction.
inline AeTrainResult train_autoencoder(const std::vector<Image>& images,
                                       const AeTrainConfig& cfg, Autoencoder& gen,
                                       Discriminator& disc) {
    if (images.size() < 2) throw EmptyDataset("train_autoencoder needs at least 2 images");
    const int h = images[0].height, w = images[0].width;
    for (const auto& img : images)
        if (img.height != h || img.width != w)
            throw ShapeMismatch("train_autoencoder: images differ in size");
    if (h % 16 != 0 || w % 16 != 0)
        throw BadInputSize("autoencoder input must be divisible by 16");

    Rng rng(cfg.seed);
    nn::Adam opt_g(gen.store().params, cfg.learning_rate, cfg.beta1);
    nn::Adam opt_d(disc.store().params, cfg.learning_rate, cfg.beta1);
    AeTrainResult result;

    const int batch = std::min<int>(cfg.batch_size, static_cast<int>(images.size()));
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<int> idx(static_cast<std::size_t>(batch));
        for (auto& v : idx)
            v = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(images.size()) - 1));
        Tensor real_batch = detail::batch_from_images(images, idx);

        // Discriminator step on detached reconstructions.
        nn::Ctx ctx{true};
        {
            auto real_in = nn::make_leaf(real_batch);
            auto fake_detached = nn::make_leaf([&] {
                auto g_in = nn::make_leaf(real_batch);
                return gen(ctx, g_in)->value;
            }());
            auto d_loss = nn::add_scaled(nn::nll_real(disc(ctx, real_in)),
                                         nn::nll_fake(disc(ctx, fake_detached)), real(1));
            opt_d.zero_grad();
            nn::backward(d_loss);
            opt_d.step();
            result.disc_loss.push_back(d_loss->value[0]);
        }

        // Generator step: non-saturating adversarial loss + lambda * rec,
        // with the reconstruction term as a per-image euclidean norm. The
        // history records the mean squared error for scale-free diagnostics.
        {
            auto g_in = nn::make_leaf(real_batch);
            auto fake = gen(ctx, g_in);
            auto adv = nn::nll_real(disc(ctx, fake));
            auto rec = nn::l2_loss(fake, g_in);
            auto g_loss = nn::add_scaled(adv, rec, static_cast<real>(cfg.lambda));
            opt_g.zero_grad();
            nn::backward(g_loss);
            opt_g.step();
            result.gen_loss.push_back(g_loss->value[0]);
            double mse = 0;
            for (std::size_t j = 0; j < fake->value.size(); ++j) {
                const double d = static_cast<double>(fake->value[j]) - real_batch[j];
                mse += d * d;
            }
            result.rec_loss.push_back(mse / static_cast<double>(fake->value.size()));
        }

        if (!std::isfinite(result.gen_loss.back()) || !std::isfinite(result.disc_loss.back()))
            throw DivergenceDetected("non-finite loss at step " + std::to_string(step));
    }
    return result;
}

/// Deterministic inference reconstruction, clamped to [0,1].
inline Image reconstruct(Autoencoder& gen, const Image& input) {
    if (input.height % 16 != 0 || input.width % 16 != 0)
        throw ShapeMismatch("reconstruct: input size must be divisible by 16");
    nn::Ctx ctx{false};
    Tensor t({1, 3, input.height, input.width});
    std::copy(input.data.begin(), input.data.end(), t.data());
    auto y = gen(ctx, nn::make_leaf(std::move(t)));
    Image out(input.height, input.width);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = std::clamp(y->value[i], real(0), real(1));
    return out;
}

}  // namespace nix
