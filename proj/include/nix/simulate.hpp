#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nix/autoencoder.hpp"
#include "nix/image.hpp"
#include "nix/mask.hpp"
#include "nix/nn/checkpoint.hpp"

namespace nix {

/// One universal-training-dataset sample: simulated inpainted image plus its
/// target mask (1 = synthesized region).
struct UniversalSample {
    Image x;
    BinaryMask m;
};

struct DatasetManifest {
    std::string version = "nix-ut-1";
    int count = 0;
    int image_size = 0;
    std::uint64_t seed = 0;
    std::string autoencoder_digest;
    std::vector<std::string> image_files;
    std::vector<std::string> mask_files;
};

inline void to_json(nlohmann::json& j, const DatasetManifest& m) {
    nlohmann::json samples = nlohmann::json::array();
    for (int i = 0; i < m.count; ++i)
        samples.push_back({{"image", m.image_files[static_cast<std::size_t>(i)]},
                           {"mask", m.mask_files[static_cast<std::size_t>(i)]}});
    j = nlohmann::json{{"version", m.version},       {"count", m.count},
                       {"image_size", m.image_size}, {"seed", m.seed},
                       {"autoencoder_digest", m.autoencoder_digest},
                       {"samples", samples}};
}

inline void from_json(const nlohmann::json& j, DatasetManifest& m) {
    j.at("version").get_to(m.version);
    j.at("count").get_to(m.count);
    j.at("image_size").get_to(m.image_size);
    j.at("seed").get_to(m.seed);
    j.at("autoencoder_digest").get_to(m.autoencoder_digest);
    m.image_files.clear();
    m.mask_files.clear();
    for (const auto& s : j.at("samples")) {
        m.image_files.push_back(s.at("image").get<std::string>());
        m.mask_files.push_back(s.at("mask").get<std::string>());
    }
}

/// X = M .* I + (1-M) .* G(I) with M in the compositing convention; here the
/// mask uses the detection polarity (1 = inpainted), so the reconstruction is
/// selected exactly where m = 1. Bit-exact selection, no blending.
inline Image composite(const Image& i, const Image& g_i, const BinaryMask& m) {
    if (i.height != g_i.height || i.width != g_i.width || i.height != m.height ||
        i.width != m.width)
        throw ShapeMismatch("composite: shapes differ");
    Image out(i.height, i.width);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < i.height; ++y)
            for (int x = 0; x < i.width; ++x)
                out.at(c, y, x) = m.at(y, x) ? g_i.at(c, y, x) : i.at(c, y, x);
    return out;
}

/// Writes the universal training dataset: for each source image, draw a fresh
/// mask, composite with the autoencoder reconstruction, and persist image,
/// mask and a manifest. Fully reproducible from (seed, autoencoder).
inline DatasetManifest generate_universal_dataset(const std::vector<Image>& images,
                                                  Autoencoder& gen, const MaskParams& mp,
                                                  const std::string& out_dir,
                                                  const std::string& autoencoder_digest = "") {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "images", ec);
    fs::create_directories(fs::path(out_dir) / "masks", ec);
    if (ec) throw IoError("cannot create dataset directories under " + out_dir);

    DatasetManifest manifest;
    manifest.count = static_cast<int>(images.size());
    manifest.image_size = images.empty() ? 0 : images[0].height;
    manifest.seed = mp.seed;
    manifest.autoencoder_digest = autoencoder_digest;

    for (std::size_t i = 0; i < images.size(); ++i) {
        MaskParams sample_params = mp;
        sample_params.seed = Rng::derive(mp.seed, i);
        const BinaryMask m =
            random_irregular_mask(images[i].height, images[i].width, sample_params);
        const Image recon = reconstruct(gen, images[i]);
        const Image x = composite(images[i], recon, m);

        char name[32];
        std::snprintf(name, sizeof(name), "%06zu.png", i);
        const std::string img_rel = std::string("images/") + name;
        const std::string mask_rel = std::string("masks/") + name;
        save_image((fs::path(out_dir) / img_rel).string(), x);
        save_mask((fs::path(out_dir) / mask_rel).string(), m);
        manifest.image_files.push_back(img_rel);
        manifest.mask_files.push_back(mask_rel);
    }

    std::ofstream os((fs::path(out_dir) / "manifest.json").string());
    if (!os) throw IoError("cannot write manifest under " + out_dir);
    os << nlohmann::json(manifest).dump(2) << "\n";
    return manifest;
}

/// In-memory dataset backed by a manifest directory.
struct Dataset {
    std::vector<Image> images;
    std::vector<BinaryMask> masks;
    DatasetManifest manifest;

    std::size_t size() const { return images.size(); }
};

inline Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream is((fs::path(dir) / "manifest.json").string());
    if (!is) throw IoError("cannot read manifest in " + dir);
    Dataset ds;
    ds.manifest = nlohmann::json::parse(is).get<DatasetManifest>();
    for (int i = 0; i < ds.manifest.count; ++i) {
        ds.images.push_back(
            load_image((fs::path(dir) / ds.manifest.image_files[static_cast<std::size_t>(i)]).string()));
        ds.masks.push_back(
            load_mask((fs::path(dir) / ds.manifest.mask_files[static_cast<std::size_t>(i)]).string()));
    }
    return ds;
}

}  // namespace nix
