#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nix/nn/ops.hpp"
#include "nix/rng.hpp"

namespace nix::nn {

/// Registry of trainable parameters and persistent buffers (running BN
/// statistics). Modules register themselves at construction; the optimizer
/// walks `params`, checkpoints walk `blobs`.
struct ParamStore {
    std::vector<NodeRef> params;
    std::map<std::string, Tensor*> blobs;

    NodeRef add_param(const std::string& name, Tensor t) {
        auto n = make_leaf(std::move(t), true);
        params.push_back(n);
        blobs[name] = &n->value;
        return n;
    }
    void add_buffer(const std::string& name, Tensor* t) { blobs[name] = t; }
};

/// Shared forward-pass context.
struct Ctx {
    bool training = false;
};

struct Conv2d {
    NodeRef w, b;
    int stride = 1, pad = 0;

    Conv2d() = default;
    Conv2d(ParamStore& store, const std::string& name, Rng& rng, int c_in, int c_out, int k,
           int stride_, bool bias = true)
        : stride(stride_), pad(k / 2) {
        Tensor wt({c_out, c_in, k, k});
        // He fan-in init
        wt.fill_normal(rng, static_cast<real>(std::sqrt(2.0 / (c_in * k * k))));
        w = store.add_param(name + ".w", std::move(wt));
        if (bias) b = store.add_param(name + ".b", Tensor({c_out}));
    }

    NodeRef operator()(const NodeRef& x) const { return conv2d(x, w, b, stride, pad); }
};

struct BatchNorm2d {
    NodeRef gamma, beta;
    // heap-allocated so registered blob pointers survive moves of the module
    std::shared_ptr<Tensor> run_mean, run_var;

    BatchNorm2d() = default;
    BatchNorm2d(ParamStore& store, const std::string& name, int c)
        : run_mean(std::make_shared<Tensor>(std::vector<int>{c})),
          run_var(std::make_shared<Tensor>(std::vector<int>{c})) {
        Tensor g({c});
        g.fill(real(1));
        gamma = store.add_param(name + ".gamma", std::move(g));
        beta = store.add_param(name + ".beta", Tensor({c}));
        run_var->fill(real(1));
        store.add_buffer(name + ".run_mean", run_mean.get());
        store.add_buffer(name + ".run_var", run_var.get());
    }

    NodeRef operator()(const Ctx& ctx, const NodeRef& x) {
        return batchnorm2d(x, gamma, beta, *run_mean, *run_var, ctx.training);
    }
};

/// Two 3x3 convolutions, each followed by batch normalization and ReLU.
struct ConvBlock {
    Conv2d conv1, conv2;
    BatchNorm2d bn1, bn2;

    ConvBlock() = default;
    ConvBlock(ParamStore& store, const std::string& name, Rng& rng, int c_in, int c_out)
        : conv1(store, name + ".conv1", rng, c_in, c_out, 3, 1),
          conv2(store, name + ".conv2", rng, c_out, c_out, 3, 1),
          bn1(store, name + ".bn1", c_out),
          bn2(store, name + ".bn2", c_out) {}

    NodeRef operator()(Ctx& ctx, const NodeRef& x) {
        return relu(bn2(ctx, conv2(relu(bn1(ctx, conv1(x))))));
    }
};

}  // namespace nix::nn
