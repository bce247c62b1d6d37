#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nix/metrics.hpp"
#include "nix/nixnet.hpp"
#include "nix/simulate.hpp"

namespace nix {

struct TrainConfig {
    real learning_rate = real(1e-4);
    real gamma = real(2);  // focal-loss focusing parameter
    int batch_size = 8;
    int max_epochs = 100;
    int patience = 10;  // epochs without validation-mIoU improvement
    real stop_miou = real(0);  // stop once val mIoU reaches this; <= 0 disables
    std::uint64_t seed = 0;

    void validate() const {
        if (learning_rate <= real(0) || gamma < real(0) || patience < 1 || batch_size < 1 ||
            max_epochs < 1)
            throw ConfigInvalid("invalid training configuration");
    }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"learning_rate", c.learning_rate}, {"gamma", c.gamma},
                       {"batch_size", c.batch_size},       {"max_epochs", c.max_epochs},
                       {"patience", c.patience},           {"stop_miou", c.stop_miou},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    c.learning_rate = j.value("learning_rate", real(1e-4));
    c.gamma = j.value("gamma", real(2));
    c.batch_size = j.value("batch_size", 8);
    c.max_epochs = j.value("max_epochs", 100);
    c.patience = j.value("patience", 10);
    c.stop_miou = j.value("stop_miou", real(0));
    c.seed = j.value("seed", std::uint64_t(0));
}

struct TrainReport {
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_miou;    // per epoch
    int best_epoch = -1;
    std::string checkpoint_digest;
};

inline nlohmann::json train_report_to_json(const TrainReport& r) {
    return nlohmann::json{{"train_loss", r.train_loss},
                          {"val_miou", r.val_miou},
                          {"best_epoch", r.best_epoch},
                          {"checkpoint_digest", r.checkpoint_digest}};
}

/// Mean over pixels of the focal-loss integrand with M = target (1 =
/// inpainted) and M-hat = p, probabilities clamped away from {0,1}.
inline double focal_loss(const ProbabilityMap& p, const BinaryMask& target, double gamma) {
    if (p.height != target.height || p.width != target.width)
        throw ShapeMismatch("focal_loss: shape mismatch");
    constexpr double eps = 1e-7;
    double s = 0;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
        const double pc = std::clamp(static_cast<double>(p.data[i]), eps, 1.0 - eps);
        const double t = target.data[i];
        s += -t * std::pow(1.0 - pc, gamma) * std::log(pc) -
             (1.0 - t) * std::pow(pc, gamma) * std::log(1.0 - pc);
    }
    return s / static_cast<double>(p.data.size());
}

namespace detail {

inline Tensor mask_target_batch(const std::vector<const BinaryMask*>& masks) {
    const int h = masks[0]->height, w = masks[0]->width;
    Tensor t({static_cast<int>(masks.size()), 1, h, w});
    const std::size_t item = static_cast<std::size_t>(h) * w;
    for (std::size_t i = 0; i < masks.size(); ++i)
        for (std::size_t j = 0; j < item; ++j)
            t[i * item + j] = static_cast<real>(masks[i]->data[j]);
    return t;
}

inline std::vector<Tensor> snapshot_blobs(const nn::ParamStore& store) {
    std::vector<Tensor> snap;
    for (const auto& [name, tensor] : store.blobs) snap.push_back(*tensor);
    return snap;
}

inline void restore_blobs(nn::ParamStore& store, const std::vector<Tensor>& snap) {
    std::size_t i = 0;
    for (auto& [name, tensor] : store.blobs) *tensor = snap[i++];
}

}  // namespace detail

/// Validation mIoU of the model over a dataset (inference mode, threshold
/// 0.5).
inline EvalResult evaluate_detector(NixNet& model, const Dataset& ds) {
    if (ds.size() == 0) throw EmptyDataset("evaluate_detector: empty dataset");
    std::vector<std::pair<ProbabilityMap, BinaryMask>> pairs;
    for (std::size_t i = 0; i < ds.size(); ++i)
        pairs.emplace_back(model.forward(ds.images[i]), ds.masks[i]);
    return miou(pairs);
}

/// Adam + focal loss training with early stopping on validation mIoU; the
/// parameters of the best validation epoch are kept.
inline TrainReport train_detector(const Dataset& train_set, const Dataset& val_set,
                                  const TrainConfig& cfg, NixNet& model) {
    cfg.validate();
    if (train_set.size() == 0 || val_set.size() == 0)
        throw EmptyDataset("train_detector: empty dataset");
    const int h = train_set.images[0].height, w = train_set.images[0].width;
    for (const auto& img : train_set.images)
        if (img.height != h || img.width != w)
            throw ShapeMismatch("train_detector: images differ in size");
    NixNet::check_input_size(h, w);

    const bool need_residual = model.config().enable_noise_stream;
    std::vector<NoiseResidual> residuals;
    if (need_residual) {
        residuals.reserve(train_set.size());
        for (const auto& img : train_set.images) residuals.push_back(noise_residual(img));
    }

    Rng rng(cfg.seed);
    nn::Adam opt(model.store().params, cfg.learning_rate);
    TrainReport report;
    double best_miou = -1.0;
    std::vector<Tensor> best_snapshot;
    int epochs_since_best = 0;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t(0));

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        // seeded Fisher-Yates shuffle
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1],
                      order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

        double loss_sum = 0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<const Image*> imgs;
            std::vector<const NoiseResidual*> res;
            std::vector<const BinaryMask*> tgts;
            for (std::size_t i = start; i < end; ++i) {
                imgs.push_back(&train_set.images[order[i]]);
                if (need_residual) res.push_back(&residuals[order[i]]);
                tgts.push_back(&train_set.masks[order[i]]);
            }
            nn::Ctx ctx{true};
            auto img_node = nn::make_leaf(NixNet::image_batch(imgs));
            nn::NodeRef res_node;
            if (need_residual) res_node = nn::make_leaf(NixNet::residual_batch(res));
            auto p = model.forward_batch(ctx, img_node, res_node);
            auto loss = nn::focal_loss(p, detail::mask_target_batch(tgts), cfg.gamma);
            if (!std::isfinite(static_cast<double>(loss->value[0])))
                throw DivergenceDetected("non-finite focal loss at epoch " + std::to_string(epoch));
            opt.zero_grad();
            nn::backward(loss);
            opt.step();
            loss_sum += loss->value[0];
            ++batches;
        }
        report.train_loss.push_back(loss_sum / std::max(1, batches));

        const double v = evaluate_detector(model, val_set).miou;
        report.val_miou.push_back(v);
        if (v > best_miou) {
            best_miou = v;
            report.best_epoch = epoch;
            best_snapshot = detail::snapshot_blobs(model.store());
            epochs_since_best = 0;
        } else if (++epochs_since_best >= cfg.patience) {
            break;
        }
        if (cfg.stop_miou > real(0) && v >= static_cast<double>(cfg.stop_miou)) break;
    }

    if (!best_snapshot.empty()) detail::restore_blobs(model.store(), best_snapshot);
    return report;
}

}  // namespace nix
