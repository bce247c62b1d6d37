#pragma once

#include <cmath>
#include <vector>

#include "nix/blas.hpp"
#include "nix/nn/graph.hpp"

namespace nix::nn {

namespace detail {

inline int conv_out(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

/// x: C x H x W slice -> col: (C*k*k) x (Ho*Wo), zero padding.
inline void im2col(const real* x, int c_in, int h, int w, int k, int stride, int pad,
                   real* col) {
    const int ho = conv_out(h, k, stride, pad);
    const int wo = conv_out(w, k, stride, pad);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::size_t row = 0;
    for (int c = 0; c < c_in; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++row) {
                real* dst = col + row * (static_cast<std::size_t>(ho) * wo);
                const real* src = x + c * plane;
                for (int oy = 0; oy < ho; ++oy) {
                    const int sy = oy * stride - pad + ky;
                    if (sy < 0 || sy >= h) {
                        for (int ox = 0; ox < wo; ++ox) *dst++ = real(0);
                        continue;
                    }
                    for (int ox = 0; ox < wo; ++ox) {
                        const int sx = ox * stride - pad + kx;
                        *dst++ = (sx < 0 || sx >= w) ? real(0) : src[static_cast<std::size_t>(sy) * w + sx];
                    }
                }
            }
        }
    }
}

/// Scatter-add of col back into a C x H x W slice.
inline void col2im(const real* col, int c_in, int h, int w, int k, int stride, int pad,
                   real* x) {
    const int ho = conv_out(h, k, stride, pad);
    const int wo = conv_out(w, k, stride, pad);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::size_t row = 0;
    for (int c = 0; c < c_in; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++row) {
                const real* src = col + row * (static_cast<std::size_t>(ho) * wo);
                real* dst = x + c * plane;
                for (int oy = 0; oy < ho; ++oy, src += wo) {
                    const int sy = oy * stride - pad + ky;
                    if (sy < 0 || sy >= h) continue;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int sx = ox * stride - pad + kx;
                        if (sx >= 0 && sx < w) dst[static_cast<std::size_t>(sy) * w + sx] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// 2-D convolution, square kernel, zero padding. w: [Cout, Cin, k, k],
/// b: [Cout] (optional, may be null).
inline NodeRef conv2d(const NodeRef& x, const NodeRef& w, const NodeRef& b, int stride,
                      int pad) {
    const int n = x->value.dim(0), c_in = x->value.dim(1);
    const int h = x->value.dim(2), wd = x->value.dim(3);
    const int c_out = w->value.dim(0), k = w->value.dim(2);
    if (w->value.dim(1) != c_in) throw ShapeMismatch("conv2d: channel mismatch");
    const int ho = detail::conv_out(h, k, stride, pad);
    const int wo = detail::conv_out(wd, k, stride, pad);
    const std::size_t cols = static_cast<std::size_t>(ho) * wo;
    const int krows = c_in * k * k;

    Tensor out({n, c_out, ho, wo});
    std::vector<real> col(static_cast<std::size_t>(krows) * cols);
    const std::size_t in_item = static_cast<std::size_t>(c_in) * h * wd;
    const std::size_t out_item = static_cast<std::size_t>(c_out) * cols;
    for (int i = 0; i < n; ++i) {
        detail::im2col(x->value.data() + i * in_item, c_in, h, wd, k, stride, pad, col.data());
        gemm(false, false, c_out, static_cast<int>(cols), krows, real(1), w->value.data(), krows,
             col.data(), static_cast<int>(cols), real(0), out.data() + i * out_item,
             static_cast<int>(cols));
        if (b) {
            real* o = out.data() + i * out_item;
            for (int c = 0; c < c_out; ++c) {
                const real bv = b->value[static_cast<std::size_t>(c)];
                for (std::size_t j = 0; j < cols; ++j) o[c * cols + j] += bv;
            }
        }
    }

    std::vector<NodeRef> parents = b ? std::vector<NodeRef>{x, w, b} : std::vector<NodeRef>{x, w};
    return make_op(std::move(out), std::move(parents),
                   [x, w, b, stride, pad, n, c_in, h, wd, c_out, k, ho, wo, cols, krows,
                    in_item, out_item](Node& self) {
        std::vector<real> col(static_cast<std::size_t>(krows) * cols);
        std::vector<real> dcol(static_cast<std::size_t>(krows) * cols);
        if (w->requires_grad) w->ensure_grad();
        if (x->requires_grad) x->ensure_grad();
        if (b && b->requires_grad) b->ensure_grad();
        for (int i = 0; i < n; ++i) {
            const real* dy = self.grad.data() + i * out_item;
            if (w->requires_grad) {
                detail::im2col(x->value.data() + i * in_item, c_in, h, wd, k, stride, pad,
                               col.data());
                // dW += dY * col^T
                gemm(false, true, c_out, krows, static_cast<int>(cols), real(1), dy,
                     static_cast<int>(cols), col.data(), static_cast<int>(cols), real(1),
                     w->grad.data(), krows);
            }
            if (b && b->requires_grad) {
                for (int c = 0; c < c_out; ++c) {
                    real s = 0;
                    for (std::size_t j = 0; j < cols; ++j) s += dy[c * cols + j];
                    b->grad[static_cast<std::size_t>(c)] += s;
                }
            }
            if (x->requires_grad) {
                // dcol = W^T * dY
                gemm(true, false, krows, static_cast<int>(cols), c_out, real(1),
                     w->value.data(), krows, dy, static_cast<int>(cols), real(0), dcol.data(),
                     static_cast<int>(cols));
                detail::col2im(dcol.data(), c_in, h, wd, k, stride, pad,
                               x->grad.data() + i * in_item);
            }
        }
    });
}

inline NodeRef relu(const NodeRef& x) {
    Tensor out(x->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = x->value[i] > real(0) ? x->value[i] : real(0);
    return make_op(std::move(out), {x}, [x](Node& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (x->value[i] > real(0)) x->grad[i] += self.grad[i];
    });
}

inline NodeRef sigmoid(const NodeRef& x) {
    Tensor out(x->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = real(1) / (real(1) + std::exp(-x->value[i]));
    return make_op(std::move(out), {x}, [x](Node& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const real s = self.value[i];
            x->grad[i] += self.grad[i] * s * (real(1) - s);
        }
    });
}

inline NodeRef add(const NodeRef& a, const NodeRef& b) {
    if (!a->value.same_shape(b->value)) throw ShapeMismatch("add: shape mismatch");
    Tensor out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
    return make_op(std::move(out), {a, b}, [a, b](Node& self) {
        for (const auto& p : {a, b}) {
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
        }
    });
}

inline NodeRef concat_channels(const std::vector<NodeRef>& xs) {
    const int n = xs[0]->value.dim(0), h = xs[0]->value.dim(2), w = xs[0]->value.dim(3);
    int c_total = 0;
    for (const auto& x : xs) {
        if (x->value.dim(0) != n || x->value.dim(2) != h || x->value.dim(3) != w)
            throw ShapeMismatch("concat_channels: spatial/batch mismatch");
        c_total += x->value.dim(1);
    }
    Tensor out({n, c_total, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        std::size_t off = 0;
        for (const auto& x : xs) {
            const std::size_t nc = static_cast<std::size_t>(x->value.dim(1)) * plane;
            std::copy(x->value.data() + i * nc, x->value.data() + (i + 1) * nc,
                      out.data() + (static_cast<std::size_t>(i) * c_total) * plane + off);
            off += nc;
        }
    }
    return make_op(std::move(out), xs, [xs, n, c_total, plane](Node& self) {
        for (int i = 0; i < n; ++i) {
            std::size_t off = 0;
            for (const auto& x : xs) {
                const std::size_t nc = static_cast<std::size_t>(x->value.dim(1)) * plane;
                if (x->requires_grad) {
                    x->ensure_grad();
                    const real* src =
                        self.grad.data() + (static_cast<std::size_t>(i) * c_total) * plane + off;
                    real* dst = x->grad.data() + i * nc;
                    for (std::size_t j = 0; j < nc; ++j) dst[j] += src[j];
                }
                off += nc;
            }
        }
    });
}

namespace detail {
struct BilinearTap {
    int i0, i1;
    real w0, w1;
};

inline std::vector<BilinearTap> bilinear_taps(int out_n, int in_n, int factor) {
    std::vector<BilinearTap> taps(static_cast<std::size_t>(out_n));
    for (int o = 0; o < out_n; ++o) {
        // align_corners = false convention
        const double src = (o + 0.5) / factor - 0.5;
        double f = std::floor(src);
        int i0 = static_cast<int>(f);
        int i1 = i0 + 1;
        double w1 = src - f;
        if (i0 < 0) { i0 = 0; i1 = 0; w1 = 0.0; }
        if (i1 >= in_n) { i1 = in_n - 1; if (i0 >= in_n) i0 = in_n - 1; }
        taps[static_cast<std::size_t>(o)] = {i0, i1, static_cast<real>(1.0 - w1),
                                             static_cast<real>(w1)};
    }
    return taps;
}
}  // namespace detail

/// Bilinear upsampling by an integer factor.
inline NodeRef upsample_bilinear(const NodeRef& x, int factor) {
    const int n = x->value.dim(0), c = x->value.dim(1);
    const int h = x->value.dim(2), w = x->value.dim(3);
    const int ho = h * factor, wo = w * factor;
    const auto ty = detail::bilinear_taps(ho, h, factor);
    const auto tx = detail::bilinear_taps(wo, w, factor);
    Tensor out({n, c, ho, wo});
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            const real* src = x->value.data() + (static_cast<std::size_t>(i) * c + ch) * h * w;
            real* dst = out.data() + (static_cast<std::size_t>(i) * c + ch) * ho * wo;
            for (int oy = 0; oy < ho; ++oy) {
                const auto& y = ty[static_cast<std::size_t>(oy)];
                for (int ox = 0; ox < wo; ++ox) {
                    const auto& xx = tx[static_cast<std::size_t>(ox)];
                    dst[static_cast<std::size_t>(oy) * wo + ox] =
                        y.w0 * (xx.w0 * src[static_cast<std::size_t>(y.i0) * w + xx.i0] +
                                xx.w1 * src[static_cast<std::size_t>(y.i0) * w + xx.i1]) +
                        y.w1 * (xx.w0 * src[static_cast<std::size_t>(y.i1) * w + xx.i0] +
                                xx.w1 * src[static_cast<std::size_t>(y.i1) * w + xx.i1]);
                }
            }
        }
    }
    return make_op(std::move(out), {x}, [x, n, c, h, w, ho, wo, ty, tx](Node& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int i = 0; i < n; ++i) {
            for (int ch = 0; ch < c; ++ch) {
                real* dst = x->grad.data() + (static_cast<std::size_t>(i) * c + ch) * h * w;
                const real* g = self.grad.data() + (static_cast<std::size_t>(i) * c + ch) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const auto& y = ty[static_cast<std::size_t>(oy)];
                    for (int ox = 0; ox < wo; ++ox) {
                        const auto& xx = tx[static_cast<std::size_t>(ox)];
                        const real gv = g[static_cast<std::size_t>(oy) * wo + ox];
                        dst[static_cast<std::size_t>(y.i0) * w + xx.i0] += gv * y.w0 * xx.w0;
                        dst[static_cast<std::size_t>(y.i0) * w + xx.i1] += gv * y.w0 * xx.w1;
                        dst[static_cast<std::size_t>(y.i1) * w + xx.i0] += gv * y.w1 * xx.w0;
                        dst[static_cast<std::size_t>(y.i1) * w + xx.i1] += gv * y.w1 * xx.w1;
                    }
                }
            }
        }
    });
}

inline NodeRef global_avg_pool(const NodeRef& x) {
    const int n = x->value.dim(0), c = x->value.dim(1);
    const int h = x->value.dim(2), w = x->value.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor out({n, c, 1, 1});
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            double s = 0;
            const real* src = x->value.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) s += src[j];
            out.at(i, ch, 0, 0) = static_cast<real>(s / static_cast<double>(plane));
        }
    return make_op(std::move(out), {x}, [x, n, c, plane](Node& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const real g = self.grad.at(i, ch, 0, 0) / static_cast<real>(plane);
                real* dst = x->grad.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
                for (std::size_t j = 0; j < plane; ++j) dst[j] += g;
            }
    });
}

/// Batch normalization over (N, H, W) per channel.
/// run_mean/run_var live outside the graph and are updated in training mode.
inline NodeRef batchnorm2d(const NodeRef& x, const NodeRef& gamma, const NodeRef& beta,
                           Tensor& run_mean, Tensor& run_var, bool training,
                           real momentum = real(0.1), real eps = real(1e-5)) {
    const int n = x->value.dim(0), c = x->value.dim(1);
    const int h = x->value.dim(2), w = x->value.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t m = static_cast<std::size_t>(n) * plane;

    auto mean = std::make_shared<std::vector<real>>(static_cast<std::size_t>(c));
    auto invstd = std::make_shared<std::vector<real>>(static_cast<std::size_t>(c));
    if (training) {
        for (int ch = 0; ch < c; ++ch) {
            double s = 0, s2 = 0;
            for (int i = 0; i < n; ++i) {
                const real* src = x->value.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
                for (std::size_t j = 0; j < plane; ++j) {
                    s += src[j];
                    s2 += static_cast<double>(src[j]) * src[j];
                }
            }
            const double mu = s / static_cast<double>(m);
            const double var = std::max(0.0, s2 / static_cast<double>(m) - mu * mu);
            (*mean)[static_cast<std::size_t>(ch)] = static_cast<real>(mu);
            (*invstd)[static_cast<std::size_t>(ch)] =
                static_cast<real>(1.0 / std::sqrt(var + static_cast<double>(eps)));
            run_mean[static_cast<std::size_t>(ch)] =
                (real(1) - momentum) * run_mean[static_cast<std::size_t>(ch)] +
                momentum * static_cast<real>(mu);
            run_var[static_cast<std::size_t>(ch)] =
                (real(1) - momentum) * run_var[static_cast<std::size_t>(ch)] +
                momentum * static_cast<real>(var);
        }
    } else {
        for (int ch = 0; ch < c; ++ch) {
            (*mean)[static_cast<std::size_t>(ch)] = run_mean[static_cast<std::size_t>(ch)];
            (*invstd)[static_cast<std::size_t>(ch)] = static_cast<real>(
                1.0 / std::sqrt(static_cast<double>(run_var[static_cast<std::size_t>(ch)]) +
                                static_cast<double>(eps)));
        }
    }

    Tensor out(x->value.shape());
    auto xhat = std::make_shared<Tensor>(x->value.shape());
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const real mu = (*mean)[static_cast<std::size_t>(ch)];
            const real is = (*invstd)[static_cast<std::size_t>(ch)];
            const real g = gamma->value[static_cast<std::size_t>(ch)];
            const real bt = beta->value[static_cast<std::size_t>(ch)];
            const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                const real xh = (x->value[base + j] - mu) * is;
                (*xhat)[base + j] = xh;
                out[base + j] = g * xh + bt;
            }
        }

    return make_op(std::move(out), {x, gamma, beta},
                   [x, gamma, beta, xhat, mean, invstd, training, n, c, plane, m](Node& self) {
        for (int ch = 0; ch < c; ++ch) {
            double sum_dy = 0, sum_dy_xhat = 0;
            for (int i = 0; i < n; ++i) {
                const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * plane;
                for (std::size_t j = 0; j < plane; ++j) {
                    sum_dy += self.grad[base + j];
                    sum_dy_xhat += static_cast<double>(self.grad[base + j]) * (*xhat)[base + j];
                }
            }
            if (gamma->requires_grad) {
                gamma->ensure_grad();
                gamma->grad[static_cast<std::size_t>(ch)] += static_cast<real>(sum_dy_xhat);
            }
            if (beta->requires_grad) {
                beta->ensure_grad();
                beta->grad[static_cast<std::size_t>(ch)] += static_cast<real>(sum_dy);
            }
            if (x->requires_grad) {
                x->ensure_grad();
                const real g = gamma->value[static_cast<std::size_t>(ch)];
                const real is = (*invstd)[static_cast<std::size_t>(ch)];
                if (training) {
                    const real k1 = g * is / static_cast<real>(m);
                    for (int i = 0; i < n; ++i) {
                        const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * plane;
                        for (std::size_t j = 0; j < plane; ++j)
                            x->grad[base + j] +=
                                k1 * (static_cast<real>(m) * self.grad[base + j] -
                                      static_cast<real>(sum_dy) -
                                      (*xhat)[base + j] * static_cast<real>(sum_dy_xhat));
                    }
                } else {
                    const real k = g * is;
                    for (int i = 0; i < n; ++i) {
                        const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * plane;
                        for (std::size_t j = 0; j < plane; ++j)
                            x->grad[base + j] += k * self.grad[base + j];
                    }
                }
            }
        }
    });
}

// ---- losses ----

/// Mean squared error between a and b (b treated as constant unless it
/// requires grad).
inline NodeRef mse_loss(const NodeRef& a, const NodeRef& b) {
    if (!a->value.same_shape(b->value)) throw ShapeMismatch("mse_loss: shape mismatch");
    const std::size_t n = a->value.size();
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a->value[i]) - b->value[i];
        s += d * d;
    }
    Tensor out({1});
    out[0] = static_cast<real>(s / static_cast<double>(n));
    return make_op(std::move(out), {a, b}, [a, b, n](Node& self) {
        const real g = self.grad[0] * real(2) / static_cast<real>(n);
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) a->grad[i] += g * (a->value[i] - b->value[i]);
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) b->grad[i] += g * (b->value[i] - a->value[i]);
        }
    });
}

/// Mean over batch items of the euclidean norm ||a_i - b_i||_2. Matches the
/// norm form of the reconstruction term, whose gradient scale is independent
/// of the pixel count.
inline NodeRef l2_loss(const NodeRef& a, const NodeRef& b) {
    if (!a->value.same_shape(b->value)) throw ShapeMismatch("l2_loss: shape mismatch");
    const int n = a->value.dim(0);
    const std::size_t item = a->value.size() / static_cast<std::size_t>(n);
    auto norms = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
    double s = 0;
    for (int i = 0; i < n; ++i) {
        double q = 0;
        for (std::size_t j = 0; j < item; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * item + j;
            const double d = static_cast<double>(a->value[idx]) - b->value[idx];
            q += d * d;
        }
        (*norms)[static_cast<std::size_t>(i)] = std::sqrt(q) + 1e-12;
        s += std::sqrt(q);
    }
    Tensor out({1});
    out[0] = static_cast<real>(s / n);
    return make_op(std::move(out), {a, b}, [a, b, n, item, norms](Node& self) {
        for (int i = 0; i < n; ++i) {
            const real g = static_cast<real>(static_cast<double>(self.grad[0]) /
                                             (n * (*norms)[static_cast<std::size_t>(i)]));
            for (std::size_t j = 0; j < item; ++j) {
                const std::size_t idx = static_cast<std::size_t>(i) * item + j;
                const real d = a->value[idx] - b->value[idx];
                if (a->requires_grad) {
                    a->ensure_grad();
                    a->grad[idx] += g * d;
                }
                if (b->requires_grad) {
                    b->ensure_grad();
                    b->grad[idx] -= g * d;
                }
            }
        }
    });
}

inline constexpr real kProbEps = real(1e-7);

/// -mean(log p); pushes p towards 1.
inline NodeRef nll_real(const NodeRef& p) {
    const std::size_t n = p->value.size();
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
        s -= std::log(std::max(static_cast<double>(p->value[i]), static_cast<double>(kProbEps)));
    Tensor out({1});
    out[0] = static_cast<real>(s / static_cast<double>(n));
    return make_op(std::move(out), {p}, [p, n](Node& self) {
        if (!p->requires_grad) return;
        p->ensure_grad();
        const real g = self.grad[0] / static_cast<real>(n);
        for (std::size_t i = 0; i < n; ++i)
            p->grad[i] -= g / std::max(p->value[i], kProbEps);
    });
}

/// -mean(log(1-p)); pushes p towards 0.
inline NodeRef nll_fake(const NodeRef& p) {
    const std::size_t n = p->value.size();
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
        s -= std::log(std::max(1.0 - static_cast<double>(p->value[i]),
                               static_cast<double>(kProbEps)));
    Tensor out({1});
    out[0] = static_cast<real>(s / static_cast<double>(n));
    return make_op(std::move(out), {p}, [p, n](Node& self) {
        if (!p->requires_grad) return;
        p->ensure_grad();
        const real g = self.grad[0] / static_cast<real>(n);
        for (std::size_t i = 0; i < n; ++i)
            p->grad[i] += g / std::max(real(1) - p->value[i], kProbEps);
    });
}

inline NodeRef add_scaled(const NodeRef& a, const NodeRef& b, real scale_b) {
    Tensor out({1});
    out[0] = a->value[0] + scale_b * b->value[0];
    return make_op(std::move(out), {a, b}, [a, b, scale_b](Node& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            a->grad[0] += self.grad[0];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            b->grad[0] += self.grad[0] * scale_b;
        }
    });
}

/// Focal loss, mean over pixels and batch. target holds {0,1}, 1 = inpainted.
inline NodeRef focal_loss(const NodeRef& p, const Tensor& target, real gamma) {
    if (!p->value.same_shape(target)) throw ShapeMismatch("focal_loss: shape mismatch");
    const std::size_t n = p->value.size();
    const double eps = static_cast<double>(kProbEps);
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pc = std::clamp(static_cast<double>(p->value[i]), eps, 1.0 - eps);
        const double t = target[i];
        s += -t * std::pow(1.0 - pc, static_cast<double>(gamma)) * std::log(pc) -
             (1.0 - t) * std::pow(pc, static_cast<double>(gamma)) * std::log(1.0 - pc);
    }
    Tensor out({1});
    out[0] = static_cast<real>(s / static_cast<double>(n));
    auto tgt = std::make_shared<Tensor>(target);
    return make_op(std::move(out), {p}, [p, tgt, gamma, n, eps](Node& self) {
        if (!p->requires_grad) return;
        p->ensure_grad();
        const double g0 = static_cast<double>(self.grad[0]) / static_cast<double>(n);
        const double gm = static_cast<double>(gamma);
        for (std::size_t i = 0; i < n; ++i) {
            const double pc = std::clamp(static_cast<double>(p->value[i]), eps, 1.0 - eps);
            const double t = (*tgt)[i];
            const double d_pos = t * (gm * std::pow(1.0 - pc, gm - 1.0) * std::log(pc) -
                                      std::pow(1.0 - pc, gm) / pc);
            const double d_neg =
                (1.0 - t) * (-gm * std::pow(pc, gm - 1.0) * std::log(1.0 - pc) +
                             std::pow(pc, gm) / (1.0 - pc));
            p->grad[i] += static_cast<real>(g0 * (d_pos + d_neg));
        }
    });
}

}  // namespace nix::nn
