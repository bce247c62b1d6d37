#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nix/nn/layers.hpp"

namespace nix::nn {

inline constexpr char kCkptMagic[8] = {'N', 'I', 'X', 'C', 'K', 'P', 'T', '1'};

namespace detail {
template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace detail

/// Binary checkpoint: magic, config JSON echo, then named parameter and
/// buffer blobs.
inline void save_checkpoint(const std::string& path, const ParamStore& store,
                            const nlohmann::json& config) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint: " + path);
    os.write(kCkptMagic, 8);
    const std::string cfg = config.dump();
    detail::write_pod(os, static_cast<std::uint32_t>(cfg.size()));
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    detail::write_pod(os, static_cast<std::uint32_t>(store.blobs.size()));
    for (const auto& [name, tensor] : store.blobs) {
        detail::write_pod(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_pod(os, static_cast<std::uint32_t>(tensor->ndim()));
        for (int d = 0; d < tensor->ndim(); ++d)
            detail::write_pod(os, static_cast<std::int32_t>(tensor->dim(d)));
        detail::write_pod(os, static_cast<std::uint32_t>(sizeof(real)));
        os.write(reinterpret_cast<const char*>(tensor->data()),
                 static_cast<std::streamsize>(tensor->size() * sizeof(real)));
    }
    if (!os) throw IoError("checkpoint write failed: " + path);
}

/// Loads blobs into an already-constructed model; shapes must match.
/// Returns the config echo.
inline nlohmann::json load_checkpoint(const std::string& path, ParamStore& store) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw IoError("bad checkpoint magic: " + path);
    std::uint32_t cfg_len = 0;
    detail::read_pod(is, cfg_len);
    std::string cfg(cfg_len, '\0');
    is.read(cfg.data(), cfg_len);
    std::uint32_t count = 0;
    detail::read_pod(is, count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t name_len = 0;
        detail::read_pod(is, name_len);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        std::uint32_t ndim = 0;
        detail::read_pod(is, ndim);
        std::vector<int> shape(ndim);
        for (auto& d : shape) {
            std::int32_t v = 0;
            detail::read_pod(is, v);
            d = v;
        }
        std::uint32_t ssize = 0;
        detail::read_pod(is, ssize);
        if (ssize != sizeof(real)) throw IoError("checkpoint scalar width mismatch: " + path);
        auto it = store.blobs.find(name);
        if (it == store.blobs.end()) throw IoError("unknown blob in checkpoint: " + name);
        if (it->second->shape() != shape) throw IoError("blob shape mismatch: " + name);
        is.read(reinterpret_cast<char*>(it->second->data()),
                static_cast<std::streamsize>(it->second->size() * sizeof(real)));
    }
    if (!is) throw IoError("truncated checkpoint: " + path);
    return nlohmann::json::parse(cfg);
}

/// Reads back only the config echo.
inline nlohmann::json read_checkpoint_config(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw IoError("bad checkpoint magic: " + path);
    std::uint32_t cfg_len = 0;
    detail::read_pod(is, cfg_len);
    std::string cfg(cfg_len, '\0');
    is.read(cfg.data(), cfg_len);
    if (!is) throw IoError("truncated checkpoint: " + path);
    return nlohmann::json::parse(cfg);
}

/// FNV-1a digest of a file, hex-encoded; used to tie dataset manifests to the
/// model that produced them.
inline std::string file_digest(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot digest: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
        const std::streamsize got = is.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (got < static_cast<std::streamsize>(sizeof(buf))) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a64:") + hex;
}

}  // namespace nix::nn
