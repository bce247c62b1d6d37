// Batch front end: dataset simulation, detector training, evaluation and
// ablation runs, one subcommand each.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nix/autoencoder.hpp"
#include "nix/image.hpp"
#include "nix/mask.hpp"
#include "nix/metrics.hpp"
#include "nix/nixnet.hpp"
#include "nix/simulate.hpp"
#include "nix/srm.hpp"
#include "nix/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t default_seed() {
    if (const char* env = std::getenv("NIX_SEED")) return std::strtoull(env, nullptr, 10);
    return 0;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw nix::IoError("cannot write " + path);
    os << j.dump(2) << "\n";
}

std::vector<nix::Image> load_image_dir(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".png") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    std::vector<nix::Image> images;
    for (const auto& f : files) images.push_back(nix::load_image(f));
    return images;
}

struct MaskFlags {
    nix::MaskParams params;
    void attach(CLI::App* cmd) {
        cmd->add_option("--min-coverage", params.min_coverage, "Minimum mask coverage fraction");
        cmd->add_option("--max-coverage", params.max_coverage, "Maximum mask coverage fraction");
        cmd->add_option("--max-strokes", params.num_strokes.hi, "Maximum strokes per mask");
        cmd->add_option("--brush-min", params.brush_width_lo, "Minimum brush width (at 256 px)");
        cmd->add_option("--brush-max", params.brush_width_hi, "Maximum brush width (at 256 px)");
    }
};

json run_report_base(const std::string& command, std::uint64_t seed) {
    return json{{"command", command}, {"seed", seed}, {"backend_deterministic", true}};
}

// ---- subcommand bodies ----

int cmd_gen_masks(const std::string& out_dir, int count, int size, std::uint64_t seed,
                  const nix::MaskParams& base_params) {
    fs::create_directories(out_dir);
    json files = json::array();
    for (int i = 0; i < count; ++i) {
        nix::MaskParams p = base_params;
        p.seed = nix::Rng::derive(seed, static_cast<std::uint64_t>(i));
        const nix::BinaryMask m = nix::random_irregular_mask(size, size, p);
        char name[32];
        std::snprintf(name, sizeof(name), "mask_%06d.png", i);
        nix::save_mask((fs::path(out_dir) / name).string(), m);
        files.push_back({{"file", name}, {"coverage", nix::mask_coverage(m)}});
    }
    json report = run_report_base("gen-masks", seed);
    report["count"] = count;
    report["size"] = size;
    report["masks"] = files;
    write_json((fs::path(out_dir) / "manifest.json").string(), report);
    std::cout << "wrote " << count << " masks to " << out_dir << "\n";
    return 0;
}

int cmd_train_ae(const std::string& images_dir, const std::string& out_ckpt,
                 nix::AeTrainConfig cfg) {
    auto images = load_image_dir(images_dir);
    nix::Autoencoder gen(cfg.seed, cfg.base_channels);
    nix::Discriminator disc(cfg.seed + 1, cfg.base_channels);
    const auto result = nix::train_autoencoder(images, cfg, gen, disc);
    gen.save(out_ckpt);
    json report = run_report_base("train-ae", cfg.seed);
    report["images"] = images.size();
    report["steps"] = cfg.steps;
    report["lambda"] = cfg.lambda;
    report["final_rec_loss"] = result.rec_loss.empty() ? 0.0 : result.rec_loss.back();
    report["final_gen_loss"] = result.gen_loss.empty() ? 0.0 : result.gen_loss.back();
    report["final_disc_loss"] = result.disc_loss.empty() ? 0.0 : result.disc_loss.back();
    report["checkpoint"] = out_ckpt;
    report["checkpoint_digest"] = nix::nn::file_digest(out_ckpt);
    write_json(out_ckpt + ".report.json", report);
    std::cout << "autoencoder saved to " << out_ckpt << "\n";
    return 0;
}

int cmd_gen_ut(const std::string& images_dir, const std::string& ae_ckpt,
               const std::string& out_dir, std::uint64_t seed, nix::MaskParams params) {
    auto images = load_image_dir(images_dir);
    auto gen = nix::Autoencoder::load(ae_ckpt);
    params.seed = seed;
    const auto manifest =
        nix::generate_universal_dataset(images, *gen, params, out_dir, nix::nn::file_digest(ae_ckpt));
    std::cout << "universal dataset with " << manifest.count << " samples in " << out_dir << "\n";
    return 0;
}

int cmd_train_det(const std::string& train_dir, const std::string& val_dir,
                  const std::string& out_ckpt, const nix::TrainConfig& cfg,
                  const nix::NixNetConfig& net_cfg) {
    const nix::Dataset train_set = nix::load_dataset(train_dir);
    const nix::Dataset val_set = nix::load_dataset(val_dir);
    nix::NixNet model(net_cfg);
    nix::TrainReport report = nix::train_detector(train_set, val_set, cfg, model);
    model.save(out_ckpt);
    report.checkpoint_digest = nix::nn::file_digest(out_ckpt);

    json j = run_report_base("train-det", cfg.seed);
    j["train_config"] = json(cfg);
    j["net_config"] = json(net_cfg);
    j["report"] = nix::train_report_to_json(report);
    write_json(out_ckpt + ".report.json", j);

    std::ofstream csv(out_ckpt + ".log.csv");
    csv << "epoch,train_loss,val_miou\n";
    for (std::size_t e = 0; e < report.train_loss.size(); ++e)
        csv << e << "," << report.train_loss[e] << "," << report.val_miou[e] << "\n";

    std::cout << "best epoch " << report.best_epoch << " val mIoU "
              << report.val_miou[static_cast<std::size_t>(report.best_epoch)] << "\n";
    return 0;
}

int cmd_eval(const std::string& data_dir, const std::string& ckpt, const std::string& out_json,
             bool gt_as_pred) {
    const nix::Dataset ds = nix::load_dataset(data_dir);
    nix::EvalResult result;
    if (gt_as_pred) {
        std::vector<std::pair<nix::ProbabilityMap, nix::BinaryMask>> pairs;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            nix::ProbabilityMap p(ds.masks[i].height, ds.masks[i].width);
            for (std::size_t j = 0; j < p.data.size(); ++j)
                p.data[j] = static_cast<nix::real>(ds.masks[i].data[j]);
            pairs.emplace_back(std::move(p), ds.masks[i]);
        }
        result = nix::miou(pairs);
    } else {
        auto model = nix::NixNet::load(ckpt);
        result = nix::evaluate_detector(*model, ds);
    }
    json j = run_report_base("eval", ds.manifest.seed);
    j["data"] = data_dir;
    j["result"] = nix::eval_result_to_json(result);
    if (!out_json.empty()) write_json(out_json, j);
    std::cout << "mIoU " << result.miou << " over " << result.count << " images\n";
    return 0;
}

int cmd_detect(const std::string& image_path, const std::string& ckpt,
               const std::string& out_mask, const std::string& out_prob) {
    const nix::Image img = nix::load_image(image_path);
    auto model = nix::NixNet::load(ckpt);
    const nix::ProbabilityMap p = model->forward(img);
    const nix::BinaryMask m = nix::binarize(p);
    nix::save_mask(out_mask, m);
    if (!out_prob.empty()) {
        std::vector<std::uint8_t> bytes(p.data.size());
        for (std::size_t i = 0; i < p.data.size(); ++i) bytes[i] = nix::to_byte(p.data[i]);
        nix::write_png(out_prob, p.height, p.width, 1, bytes.data());
    }
    std::cout << "predicted mask coverage " << nix::mask_coverage(m) << "\n";
    return 0;
}

int cmd_srm(const std::string& image_path, const std::string& out_prefix) {
    const nix::Image img = nix::load_image(image_path);
    const nix::NoiseResidual r = nix::noise_residual(img);
    for (int k = 0; k < 3; ++k) {
        std::vector<std::uint8_t> bytes(static_cast<std::size_t>(r.height) * r.width);
        for (int y = 0; y < r.height; ++y)
            for (int x = 0; x < r.width; ++x)
                bytes[static_cast<std::size_t>(y) * r.width + x] =
                    nix::to_byte((r.at(k, y, x) + nix::real(1)) / nix::real(2));
        nix::write_png(out_prefix + "_k" + std::to_string(k) + ".png", r.height, r.width, 1,
                       bytes.data());
    }
    std::cout << "wrote residual maps with prefix " << out_prefix << "\n";
    return 0;
}

struct AblationVariant {
    std::string name;
    nix::NixNetConfig cfg;
};

std::vector<AblationVariant> ablation_variants(std::uint64_t init_seed) {
    nix::NixNetConfig full;
    full.init_seed = init_seed;
    std::vector<AblationVariant> v;
    auto push = [&](const std::string& name, auto mutate) {
        nix::NixNetConfig c = full;
        mutate(c);
        v.push_back({name, c});
    };
    push("wo_noise_stream", [](nix::NixNetConfig& c) { c.enable_noise_stream = false; });
    push("wo_image_stream", [](nix::NixNetConfig& c) { c.enable_image_stream = false; });
    push("wo_all_fusion", [](nix::NixNetConfig& c) {
        c.enable_fusion_12 = false;
        c.enable_fusion_3 = false;
    });
    push("wo_fusion_12", [](nix::NixNetConfig& c) { c.enable_fusion_12 = false; });
    push("wo_fusion_3", [](nix::NixNetConfig& c) { c.enable_fusion_3 = false; });
    push("full", [](nix::NixNetConfig&) {});
    return v;
}

int cmd_ablate(const std::string& train_dir, const std::string& val_dir,
               const std::string& test_dir, const std::string& out_dir,
               const nix::TrainConfig& cfg) {
    const nix::Dataset train_set = nix::load_dataset(train_dir);
    const nix::Dataset val_set = nix::load_dataset(val_dir);
    const nix::Dataset test_set = test_dir.empty() ? val_set : nix::load_dataset(test_dir);
    fs::create_directories(out_dir);

    json rows = json::array();
    std::cout << "variant                mIoU\n";
    for (const auto& variant : ablation_variants(cfg.seed)) {
        nix::NixNet model(variant.cfg);
        nix::train_detector(train_set, val_set, cfg, model);
        const nix::EvalResult r = nix::evaluate_detector(model, test_set);
        model.save((fs::path(out_dir) / (variant.name + ".ckpt")).string());
        rows.push_back({{"variant", variant.name}, {"miou", r.miou}});
        std::printf("%-22s %.4f\n", variant.name.c_str(), r.miou);
    }
    json report = run_report_base("ablate", cfg.seed);
    report["train_config"] = json(cfg);
    report["rows"] = rows;
    write_json((fs::path(out_dir) / "ablation.json").string(), report);
    return 0;
}

int cmd_describe(const std::string& ckpt) {
    auto model = nix::NixNet::load(ckpt);
    std::cout << json(model->config()).dump(2) << "\n" << model->describe();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Universal deep-inpainting detection toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; command-line flags win");

    // gen-masks
    auto* gm = app.add_subcommand("gen-masks", "Generate irregular binary masks");
    int gm_count = 10, gm_size = 256;
    std::uint64_t gm_seed = default_seed();
    std::string gm_out = "masks_out";
    MaskFlags gm_mask;
    gm->add_option("--count", gm_count);
    gm->add_option("--size", gm_size);
    gm->add_option("--seed", gm_seed);
    gm->add_option("--out", gm_out);
    gm_mask.attach(gm);

    // train-ae
    auto* ta = app.add_subcommand("train-ae", "Train the reconstruction autoencoder (GAN)");
    std::string ta_images, ta_out = "autoencoder.ckpt";
    nix::AeTrainConfig ta_cfg;
    ta_cfg.seed = default_seed();
    ta->add_option("--images", ta_images)->required();
    ta->add_option("--out", ta_out);
    ta->add_option("--steps", ta_cfg.steps);
    ta->add_option("--batch", ta_cfg.batch_size);
    ta->add_option("--seed", ta_cfg.seed);
    ta->add_option("--lambda", ta_cfg.lambda);
    ta->add_option("--lr", ta_cfg.learning_rate);
    ta->add_option("--base-channels", ta_cfg.base_channels);

    // gen-ut
    auto* gu = app.add_subcommand("gen-ut", "Generate the universal training dataset");
    std::string gu_images, gu_ae, gu_out = "ut_out";
    std::uint64_t gu_seed = default_seed();
    MaskFlags gu_mask;
    gu->add_option("--images", gu_images)->required();
    gu->add_option("--ae", gu_ae)->required();
    gu->add_option("--out", gu_out);
    gu->add_option("--seed", gu_seed);
    gu_mask.attach(gu);

    // train-det
    auto* td = app.add_subcommand("train-det", "Train the two-stream detector");
    std::string td_train, td_val, td_out = "nixnet.ckpt";
    nix::TrainConfig td_cfg;
    td_cfg.seed = default_seed();
    nix::NixNetConfig td_net;
    td->add_option("--train", td_train)->required();
    td->add_option("--val", td_val)->required();
    td->add_option("--out", td_out);
    td->add_option("--lr", td_cfg.learning_rate);
    td->add_option("--gamma", td_cfg.gamma);
    td->add_option("--batch", td_cfg.batch_size);
    td->add_option("--epochs", td_cfg.max_epochs);
    td->add_option("--patience", td_cfg.patience);
    td->add_option("--seed", td_cfg.seed);
    td->add_flag("--no-image-stream", [&td_net](std::int64_t) { td_net.enable_image_stream = false; });
    td->add_flag("--no-noise-stream", [&td_net](std::int64_t) { td_net.enable_noise_stream = false; });
    td->add_flag("--no-fusion-12", [&td_net](std::int64_t) { td_net.enable_fusion_12 = false; });
    td->add_flag("--no-fusion-3", [&td_net](std::int64_t) { td_net.enable_fusion_3 = false; });

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset (mIoU)");
    std::string ev_data, ev_ckpt, ev_out;
    bool ev_gt = false;
    ev->add_option("--data", ev_data)->required();
    ev->add_option("--ckpt", ev_ckpt);
    ev->add_option("--out", ev_out);
    ev->add_flag("--gt-as-pred", ev_gt, "Score ground-truth masks against themselves");

    // detect
    auto* de = app.add_subcommand("detect", "Predict the inpainting mask of one image");
    std::string de_img, de_ckpt, de_out = "detected_mask.png", de_prob;
    de->add_option("image", de_img)->required();
    de->add_option("--ckpt", de_ckpt)->required();
    de->add_option("--out-mask", de_out);
    de->add_option("--out-prob", de_prob);

    // srm
    auto* sr = app.add_subcommand("srm", "Dump SRM residual maps of an image");
    std::string sr_img, sr_prefix = "residual";
    sr->add_option("image", sr_img)->required();
    sr->add_option("--out-prefix", sr_prefix);

    // ablate
    auto* ab = app.add_subcommand("ablate", "Train and score all ablation variants");
    std::string ab_train, ab_val, ab_test, ab_out = "ablation_out";
    nix::TrainConfig ab_cfg;
    ab_cfg.seed = default_seed();
    ab->add_option("--train", ab_train)->required();
    ab->add_option("--val", ab_val)->required();
    ab->add_option("--test", ab_test);
    ab->add_option("--out", ab_out);
    ab->add_option("--lr", ab_cfg.learning_rate);
    ab->add_option("--batch", ab_cfg.batch_size);
    ab->add_option("--epochs", ab_cfg.max_epochs);
    ab->add_option("--patience", ab_cfg.patience);
    ab->add_option("--seed", ab_cfg.seed);

    // describe
    auto* ds = app.add_subcommand("describe", "Print checkpoint config and layer shapes");
    std::string ds_ckpt;
    ds->add_option("--ckpt", ds_ckpt)->required();

    try {
        app.parse(argc, argv);
        // Config-file defaults: applied for flags not given on the command line.
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            if (!is) throw nix::IoError("cannot read config: " + config_path);
            const json cfg = json::parse(is);
            auto apply = [&](CLI::App* cmd, const std::string& flag, auto& target) {
                const std::string key = flag.substr(2);
                if (cmd->count(flag) == 0 && cfg.contains(key))
                    cfg.at(key).get_to(target);
            };
            if (*gm) {
                apply(gm, "--count", gm_count);
                apply(gm, "--size", gm_size);
                apply(gm, "--seed", gm_seed);
                apply(gm, "--out", gm_out);
            }
            if (*td) {
                apply(td, "--lr", td_cfg.learning_rate);
                apply(td, "--gamma", td_cfg.gamma);
                apply(td, "--batch", td_cfg.batch_size);
                apply(td, "--epochs", td_cfg.max_epochs);
                apply(td, "--patience", td_cfg.patience);
                apply(td, "--seed", td_cfg.seed);
            }
        }

        if (*gm) {
            nix::MaskParams p = gm_mask.params;
            return cmd_gen_masks(gm_out, gm_count, gm_size, gm_seed, p);
        }
        if (*ta) return cmd_train_ae(ta_images, ta_out, ta_cfg);
        if (*gu) return cmd_gen_ut(gu_images, gu_ae, gu_out, gu_seed, gu_mask.params);
        if (*td) return cmd_train_det(td_train, td_val, td_out, td_cfg, td_net);
        if (*ev) return cmd_eval(ev_data, ev_ckpt, ev_out, ev_gt);
        if (*de) return cmd_detect(de_img, de_ckpt, de_out, de_prob);
        if (*sr) return cmd_srm(sr_img, sr_prefix);
        if (*ab) return cmd_ablate(ab_train, ab_val, ab_test, ab_out, ab_cfg);
        if (*ds) return cmd_describe(ds_ckpt);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const nix::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
