// Double-precision acceptance checks: focal-loss oracle and gradient flow
// through the full detector.

#include <cmath>
#include <string>
#include <vector>

#include "harness.hpp"
#include "nix/nixnet.hpp"
#include "nix/train.hpp"

using namespace nix;
using acceptance::require;

static_assert(sizeof(real) == sizeof(double), "this suite must run in double precision");

namespace {

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

std::string check_focal_oracle() {
    // hand value: target 1, p 0.5, gamma 2
    {
        ProbabilityMap p(1, 1);
        p.data[0] = real(0.5);
        BinaryMask t(1, 1);
        t.data[0] = 1;
        require(std::abs(focal_loss(p, t, 2.0) - 0.25 * std::log(2.0)) <= 1e-6,
                "hand-computed value differs");
    }

    // gamma 0 equals the cross-entropy oracle
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        ProbabilityMap p(4, 4);
        BinaryMask t(4, 4);
        double bce = 0;
        for (std::size_t i = 0; i < 16; ++i) {
            p.data[i] = static_cast<real>(rng.uniform(0.01, 0.99));
            t.data[i] = rng.uniform() < 0.5 ? 1 : 0;
            bce += t.data[i] ? -std::log(static_cast<double>(p.data[i]))
                             : -std::log(1.0 - static_cast<double>(p.data[i]));
        }
        require(std::abs(focal_loss(p, t, 0.0) - bce / 16.0) <= 1e-6,
                "gamma 0 does not match cross-entropy");
    }

    // analytic gradient vs central differences on 20 random 4x4 instances
    for (int trial = 0; trial < 20; ++trial) {
        Tensor pt({1, 1, 4, 4}), tt({1, 1, 4, 4});
        for (std::size_t i = 0; i < 16; ++i) {
            pt[i] = static_cast<real>(rng.uniform(0.05, 0.95));
            tt[i] = rng.uniform() < 0.5 ? real(1) : real(0);
        }
        auto pn = nn::make_leaf(pt, true);
        auto loss = nn::focal_loss(pn, tt, real(2));
        nn::backward(loss);
        const double eps = 1e-6;
        for (std::size_t i = 0; i < 16; ++i) {
            const real saved = pn->value[i];
            pn->value[i] = saved + static_cast<real>(eps);
            const double up = nn::focal_loss(pn, tt, real(2))->value[0];
            pn->value[i] = saved - static_cast<real>(eps);
            const double down = nn::focal_loss(pn, tt, real(2))->value[0];
            pn->value[i] = saved;
            const double fd = (up - down) / (2 * eps);
            require(rel_err(pn->grad[i], fd) <= 1e-3,
                    "focal gradient differs from finite differences");
        }
    }
    return "hand values, gamma-0 oracle and 20 gradient instances";
}

nn::NodeRef find_param(nn::ParamStore& store, const std::string& name) {
    Tensor* t = store.blobs.at(name);
    for (auto& p : store.params)
        if (&p->value == t) return p;
    throw acceptance::Failure("parameter not found: " + name);
}

double max_abs_grad(const nn::NodeRef& p) {
    double m = 0;
    for (std::size_t i = 0; i < p->grad.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(p->grad[i])));
    return m;
}

std::string check_connectivity() {
    NixNetConfig cfg;
    cfg.init_seed = 7;
    NixNet model(cfg);

    Rng rng(21);
    Tensor img({1, 3, 32, 32}), res({1, 3, 32, 32}), target({1, 1, 32, 32});
    for (std::size_t i = 0; i < img.size(); ++i) {
        img[i] = static_cast<real>(rng.uniform());
        res[i] = static_cast<real>(rng.uniform(-1.0, 1.0));
    }
    for (std::size_t i = 0; i < target.size(); ++i)
        target[i] = rng.uniform() < 0.3 ? real(1) : real(0);

    auto run_loss = [&] {
        nn::Ctx ctx{true};
        auto p = model.forward_batch(ctx, nn::make_leaf(img), nn::make_leaf(res));
        return nn::focal_loss(p, target, real(2));
    };

    const std::vector<std::string> checkpoints = {
        "image_stream.block1.unit1.conv1.w", "noise_stream.block1.unit1.conv1.w",
        "fusion1.down12.w", "fusion2.down12.w", "fusion3.down12.w"};

    for (auto& p : model.store().params) {
        p->ensure_grad();
        p->grad.fill(real(0));
    }
    auto loss = run_loss();
    nn::backward(loss);

    for (const auto& name : checkpoints) {
        auto p = find_param(model.store(), name);
        require(max_abs_grad(p) > 0, "no gradient reaches " + name);
    }

    // finite-difference spot checks at each parameter's strongest coordinate
    const double eps = 1e-5;
    for (const auto& name : checkpoints) {
        auto p = find_param(model.store(), name);
        std::size_t best = 0;
        for (std::size_t i = 0; i < p->grad.size(); ++i)
            if (std::abs(p->grad[i]) > std::abs(p->grad[best])) best = i;
        const real saved = p->value[best];
        p->value[best] = saved + static_cast<real>(eps);
        const double up = run_loss()->value[0];
        p->value[best] = saved - static_cast<real>(eps);
        const double down = run_loss()->value[0];
        p->value[best] = saved;
        const double fd = (up - down) / (2 * eps);
        require(rel_err(p->grad[best], fd) < 1e-2,
                "finite-difference check failed at " + name);
    }
    return "both streams and all three fusion stages carry gradient";
}

}  // namespace

int main() {
    acceptance::Suite suite;
    suite.criterion("focal-loss oracle", check_focal_oracle);
    suite.criterion("gradient connectivity", check_connectivity);
    return suite.exit_code();
}
