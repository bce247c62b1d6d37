#pragma once

#include <cmath>
#include <vector>

#include "nix/nn/layers.hpp"

namespace nix::nn {

class Adam {
public:
    explicit Adam(std::vector<NodeRef> params, real lr, real beta1 = real(0.9),
                  real beta2 = real(0.999), real eps = real(1e-8))
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& p : params_) {
            m_.emplace_back(p->value.shape());
            v_.emplace_back(p->value.shape());
        }
    }

    void zero_grad() {
        for (const auto& p : params_) {
            p->ensure_grad();
            p->grad.fill(real(0));
        }
    }

    void step() {
        ++t_;
        const real bc1 = real(1) - static_cast<real>(std::pow(beta1_, t_));
        const real bc2 = real(1) - static_cast<real>(std::pow(beta2_, t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i];
            for (std::size_t j = 0; j < p->value.size(); ++j) {
                const real g = p->grad[j];
                m_[i][j] = beta1_ * m_[i][j] + (real(1) - beta1_) * g;
                v_[i][j] = beta2_ * v_[i][j] + (real(1) - beta2_) * g * g;
                const real mhat = m_[i][j] / bc1;
                const real vhat = v_[i][j] / bc2;
                p->value[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    std::vector<NodeRef> params_;
    std::vector<Tensor> m_, v_;
    real lr_, beta1_, beta2_, eps_;
    int t_ = 0;
};

}  // namespace nix::nn
