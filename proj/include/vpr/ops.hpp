#pragma once

#include <cmath>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "vpr/tensor.hpp"

// Differentiable operations over Tensor<T>. Every op records a backward
// closure on the result node; gradients are accumulated into parents on
// Tensor::backward(). All loops are sequential and deterministic.

namespace vpr {

namespace detail {

inline std::size_t uz(index_t i) { return static_cast<std::size_t>(i); }

inline Shape drop_last(const Shape& s) { return Shape(s.begin(), s.end() - 1); }

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                        const char* op) {
    if (a.shape() != b.shape()) {
        throw dimension_error(std::string(op) + ": shape mismatch " +
                              shape_str(a.shape()) + " vs " +
                              shape_str(b.shape()));
    }
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "add");
    std::vector<T> out(a.data());
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
    auto n = detail::make_result<T>(a.shape(), std::move(out),
                                    {a.node(), b.node()}, "add");
    auto *an = a.raw(), *bn = b.raw(), *on = n.get();
    n->backward = [an, bn, on] {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                an->grad[i] += on->grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                bn->grad[i] += on->grad[i];
        }
    };
    return Tensor<T>(std::move(n));
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "sub");
    std::vector<T> out(a.data());
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
    auto n = detail::make_result<T>(a.shape(), std::move(out),
                                    {a.node(), b.node()}, "sub");
    auto *an = a.raw(), *bn = b.raw(), *on = n.get();
    n->backward = [an, bn, on] {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                an->grad[i] += on->grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                bn->grad[i] -= on->grad[i];
        }
    };
    return Tensor<T>(std::move(n));
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "mul");
    std::vector<T> out(a.data());
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
    auto n = detail::make_result<T>(a.shape(), std::move(out),
                                    {a.node(), b.node()}, "mul");
    auto *an = a.raw(), *bn = b.raw(), *on = n.get();
    n->backward = [an, bn, on] {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                an->grad[i] += on->grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                bn->grad[i] += on->grad[i] * an->value[i];
        }
    };
    return Tensor<T>(std::move(n));
}

// y = alpha * x + beta, elementwise with scalar constants.
template <typename T>
Tensor<T> affine(const Tensor<T>& x, double alpha, double beta) {
    std::vector<T> out(x.data().size());
    const auto& xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<T>(alpha * xd[i] + beta);
    auto n = detail::make_result<T>(x.shape(), std::move(out), {x.node()},
                                    "affine");
    auto *xn = x.raw(), *on = n.get();
    n->backward = [xn, on, alpha] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i)
            xn->grad[i] += static_cast<T>(alpha) * on->grad[i];
    };
    return Tensor<T>(std::move(n));
}

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& x) {
    std::vector<T> out(x.data().size());
    const auto& xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::tanh(xd[i]);
    auto n = detail::make_result<T>(x.shape(), std::move(out), {x.node()},
                                    "tanh");
    auto *xn = x.raw(), *on = n.get();
    n->backward = [xn, on] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) {
            const T y = on->value[i];
            xn->grad[i] += on->grad[i] * (T(1) - y * y);
        }
    };
    return Tensor<T>(std::move(n));
}

// Tanh approximation of GELU:
//   y = 0.5 x (1 + tanh(s (x + c x^3))), s = sqrt(2/pi), c = 0.044715.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    constexpr double s = 0.7978845608028654;
    constexpr double c = 0.044715;
    std::vector<T> out(x.data().size());
    const auto& xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = static_cast<double>(xd[i]);
        out[i] = static_cast<T>(0.5 * v * (1.0 + std::tanh(s * (v + c * v * v * v))));
    }
    auto n = detail::make_result<T>(x.shape(), std::move(out), {x.node()},
                                    "gelu");
    auto *xn = x.raw(), *on = n.get();
    n->backward = [xn, on] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) {
            const double v = static_cast<double>(xn->value[i]);
            const double t = std::tanh(s * (v + c * v * v * v));
            const double d =
                0.5 * (1.0 + t) +
                0.5 * v * (1.0 - t * t) * s * (1.0 + 3.0 * c * v * v);
            xn->grad[i] += static_cast<T>(static_cast<double>(on->grad[i]) * d);
        }
    };
    return Tensor<T>(std::move(n));
}

// Softmax over the last axis; rows sum to 1.
template <typename T>
Tensor<T> softmax_lastaxis(const Tensor<T>& x) {
    const index_t d = x.dim(-1);
    const index_t rows = x.size() / d;
    std::vector<T> out(x.data().size());
    const auto& xd = x.data();
    for (index_t r = 0; r < rows; ++r) {
        const std::size_t base = detail::uz(r * d);
        double mx = -1e300;
        for (index_t j = 0; j < d; ++j)
            mx = std::max(mx, static_cast<double>(xd[base + detail::uz(j)]));
        double sum = 0.0;
        for (index_t j = 0; j < d; ++j) {
            const double e = std::exp(static_cast<double>(xd[base + detail::uz(j)]) - mx);
            out[base + detail::uz(j)] = static_cast<T>(e);
            sum += e;
        }
        for (index_t j = 0; j < d; ++j)
            out[base + detail::uz(j)] = static_cast<T>(
                static_cast<double>(out[base + detail::uz(j)]) / sum);
    }
    auto n = detail::make_result<T>(x.shape(), std::move(out), {x.node()},
                                    "softmax");
    auto *xn = x.raw(), *on = n.get();
    n->backward = [xn, on, d, rows] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (index_t r = 0; r < rows; ++r) {
            const std::size_t base = detail::uz(r * d);
            double dot = 0.0;
            for (index_t j = 0; j < d; ++j)
                dot += static_cast<double>(on->grad[base + detail::uz(j)]) *
                       static_cast<double>(on->value[base + detail::uz(j)]);
            for (index_t j = 0; j < d; ++j) {
                const std::size_t k = base + detail::uz(j);
                xn->grad[k] += static_cast<T>(
                    static_cast<double>(on->value[k]) *
                    (static_cast<double>(on->grad[k]) - dot));
            }
        }
    };
    return Tensor<T>(std::move(n));
}

// Per-last-axis normalization with affine: y = g * (x - mu) / sqrt(var + eps) + b.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, double eps = 1e-6) {
    const index_t d = x.dim(-1);
    if (gamma.size() != d || beta.size() != d) {
        throw dimension_error("layer_norm: gamma/beta length " +
                              std::to_string(gamma.size()) + "/" +
                              std::to_string(beta.size()) +
                              " does not match last axis of " +
                              shape_str(x.shape()));
    }
    const index_t rows = x.size() / d;
    std::vector<T> out(x.data().size());
    const auto& xd = x.data();
    const auto& gd = gamma.data();
    const auto& bd = beta.data();
    for (index_t r = 0; r < rows; ++r) {
        const std::size_t base = detail::uz(r * d);
        double mu = 0.0;
        for (index_t j = 0; j < d; ++j) mu += xd[base + detail::uz(j)];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (index_t j = 0; j < d; ++j) {
            const double c = static_cast<double>(xd[base + detail::uz(j)]) - mu;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double rstd = 1.0 / std::sqrt(var + eps);
        for (index_t j = 0; j < d; ++j) {
            const std::size_t k = base + detail::uz(j);
            const double xhat = (static_cast<double>(xd[k]) - mu) * rstd;
            out[k] = static_cast<T>(xhat * static_cast<double>(gd[detail::uz(j)]) +
                                    static_cast<double>(bd[detail::uz(j)]));
        }
    }
    auto n = detail::make_result<T>(
        x.shape(), std::move(out), {x.node(), gamma.node(), beta.node()},
        "layer_norm");
    auto *xn = x.raw(), *gn = gamma.raw(), *bn = beta.raw(), *on = n.get();
    n->backward = [xn, gn, bn, on, d, rows, eps] {
        for (index_t r = 0; r < rows; ++r) {
            const std::size_t base = detail::uz(r * d);
            double mu = 0.0;
            for (index_t j = 0; j < d; ++j) mu += xn->value[base + detail::uz(j)];
            mu /= static_cast<double>(d);
            double var = 0.0;
            for (index_t j = 0; j < d; ++j) {
                const double c =
                    static_cast<double>(xn->value[base + detail::uz(j)]) - mu;
                var += c * c;
            }
            var /= static_cast<double>(d);
            const double rstd = 1.0 / std::sqrt(var + eps);

            if (gn->requires_grad || bn->requires_grad) {
                if (gn->requires_grad) gn->ensure_grad();
                if (bn->requires_grad) bn->ensure_grad();
                for (index_t j = 0; j < d; ++j) {
                    const std::size_t k = base + detail::uz(j);
                    const double xhat =
                        (static_cast<double>(xn->value[k]) - mu) * rstd;
                    if (gn->requires_grad)
                        gn->grad[detail::uz(j)] += static_cast<T>(
                            static_cast<double>(on->grad[k]) * xhat);
                    if (bn->requires_grad)
                        bn->grad[detail::uz(j)] += on->grad[k];
                }
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                double dvar = 0.0, dmu = 0.0, dsum = 0.0;
                for (index_t j = 0; j < d; ++j) {
                    const std::size_t k = base + detail::uz(j);
                    const double dxhat =
                        static_cast<double>(on->grad[k]) *
                        static_cast<double>(gn->value[detail::uz(j)]);
                    const double cx =
                        static_cast<double>(xn->value[k]) - mu;
                    dvar += dxhat * cx * (-0.5) * rstd * rstd * rstd;
                    dmu += -dxhat * rstd;
                    dsum += cx;
                }
                dmu += dvar * (-2.0 / static_cast<double>(d)) * dsum;
                for (index_t j = 0; j < d; ++j) {
                    const std::size_t k = base + detail::uz(j);
                    const double dxhat =
                        static_cast<double>(on->grad[k]) *
                        static_cast<double>(gn->value[detail::uz(j)]);
                    const double cx =
                        static_cast<double>(xn->value[k]) - mu;
                    xn->grad[k] += static_cast<T>(
                        dxhat * rstd +
                        dvar * 2.0 * cx / static_cast<double>(d) +
                        dmu / static_cast<double>(d));
                }
            }
        }
    };
    return Tensor<T>(std::move(n));
}

// y = x W + b over the last axis; leading axes broadcast as a flat batch.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& W, const Tensor<T>& b) {
    if (W.ndim() != 2) {
        throw dimension_error("linear: weight must be 2-d, got " +
                              shape_str(W.shape()));
    }
    const index_t in = W.dim(0), out_dim = W.dim(1);
    if (x.dim(-1) != in) {
        throw dimension_error("linear: input " + shape_str(x.shape()) +
                              " does not match weight " + shape_str(W.shape()));
    }
    if (b.size() != out_dim) {
        throw dimension_error("linear: bias " + shape_str(b.shape()) +
                              " does not match weight " + shape_str(W.shape()));
    }
    const index_t M = x.size() / in;
    Shape oshape = x.shape();
    oshape.back() = out_dim;
    std::vector<T> y(detail::uz(M * out_dim));
    const auto& xd = x.data();
    const auto& wd = W.data();
    const auto& bd = b.data();
    for (index_t m = 0; m < M; ++m) {
        const std::size_t xb = detail::uz(m * in);
        const std::size_t yb = detail::uz(m * out_dim);
        for (index_t o = 0; o < out_dim; ++o)
            y[yb + detail::uz(o)] = bd[detail::uz(o)];
        for (index_t k = 0; k < in; ++k) {
            const T xv = xd[xb + detail::uz(k)];
            if (xv == T(0)) continue;
            const std::size_t wb = detail::uz(k * out_dim);
            for (index_t o = 0; o < out_dim; ++o)
                y[yb + detail::uz(o)] += xv * wd[wb + detail::uz(o)];
        }
    }
    auto n = detail::make_result<T>(std::move(oshape), std::move(y),
                                    {x.node(), W.node(), b.node()}, "linear");
    auto *xn = x.raw(), *wn = W.raw(), *bn = b.raw(), *on = n.get();
    n->backward = [xn, wn, bn, on, M, in, out_dim] {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (index_t m = 0; m < M; ++m) {
                const std::size_t xb = detail::uz(m * in);
                const std::size_t yb = detail::uz(m * out_dim);
                for (index_t k = 0; k < in; ++k) {
                    double acc = 0.0;
                    const std::size_t wb = detail::uz(k * out_dim);
                    for (index_t o = 0; o < out_dim; ++o)
                        acc += static_cast<double>(on->grad[yb + detail::uz(o)]) *
                               static_cast<double>(wn->value[wb + detail::uz(o)]);
                    xn->grad[xb + detail::uz(k)] += static_cast<T>(acc);
                }
            }
        }
        if (wn->requires_grad) {
            wn->ensure_grad();
            for (index_t m = 0; m < M; ++m) {
                const std::size_t xb = detail::uz(m * in);
                const std::size_t yb = detail::uz(m * out_dim);
                for (index_t k = 0; k < in; ++k) {
                    const T xv = xn->value[xb + detail::uz(k)];
                    if (xv == T(0)) continue;
                    const std::size_t wb = detail::uz(k * out_dim);
                    for (index_t o = 0; o < out_dim; ++o)
                        wn->grad[wb + detail::uz(o)] +=
                            xv * on->grad[yb + detail::uz(o)];
                }
            }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (index_t m = 0; m < M; ++m) {
                const std::size_t yb = detail::uz(m * out_dim);
                for (index_t o = 0; o < out_dim; ++o)
                    bn->grad[detail::uz(o)] += on->grad[yb + detail::uz(o)];
            }
        }
    };
    return Tensor<T>(std::move(n));
}

// Batched matmul: [..., M, K] x [..., K, N] -> [..., M, N].
// Leading axes must match exactly.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() < 2 || b.ndim() != a.ndim()) {
        throw dimension_error("matmul: rank mismatch " + shape_str(a.shape()) +
                              " vs " + shape_str(b.shape()));
    }
    for (int i = 0; i + 2 < a.ndim(); ++i) {
        if (a.shape()[detail::uz(i)] != b.shape()[detail::uz(i)])
            throw dimension_error("matmul: batch axes differ " +
                                  shape_str(a.shape()) + " vs " +
                                  shape_str(b.shape()));
    }
    const index_t M = a.dim(-2), K = a.dim(-1), N = b.dim(-1);
    if (b.dim(-2) != K) {
        throw dimension_error("matmul: inner axes differ " +
                              shape_str(a.shape()) + " vs " +
                              shape_str(b.shape()));
    }
    const index_t batch = a.size() / (M * K);
    Shape oshape = a.shape();
    oshape[oshape.size() - 1] = N;
    oshape[oshape.size() - 2] = M;
    std::vector<T> y(detail::uz(batch * M * N), T(0));
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (index_t g = 0; g < batch; ++g) {
        const std::size_t ab = detail::uz(g * M * K);
        const std::size_t bb = detail::uz(g * K * N);
        const std::size_t yb = detail::uz(g * M * N);
        for (index_t m = 0; m < M; ++m) {
            for (index_t k = 0; k < K; ++k) {
                const T av = ad[ab + detail::uz(m * K + k)];
                if (av == T(0)) continue;
                const std::size_t brow = bb + detail::uz(k * N);
                const std::size_t yrow = yb + detail::uz(m * N);
                for (index_t nn = 0; nn < N; ++nn)
                    y[yrow + detail::uz(nn)] += av * bd[brow + detail::uz(nn)];
            }
        }
    }
    auto node = detail::make_result<T>(std::move(oshape), std::move(y),
                                       {a.node(), b.node()}, "matmul");
    auto *an = a.raw(), *bn = b.raw(), *on = node.get();
    node->backward = [an, bn, on, batch, M, K, N] {
        if (an->requires_grad) {
            an->ensure_grad();
            // dA = dY B^T
            for (index_t g = 0; g < batch; ++g) {
                const std::size_t ab = detail::uz(g * M * K);
                const std::size_t bb = detail::uz(g * K * N);
                const std::size_t yb = detail::uz(g * M * N);
                for (index_t m = 0; m < M; ++m) {
                    for (index_t k = 0; k < K; ++k) {
                        double acc = 0.0;
                        for (index_t nn = 0; nn < N; ++nn)
                            acc += static_cast<double>(
                                       on->grad[yb + detail::uz(m * N + nn)]) *
                                   static_cast<double>(
                                       bn->value[bb + detail::uz(k * N + nn)]);
                        an->grad[ab + detail::uz(m * K + k)] +=
                            static_cast<T>(acc);
                    }
                }
            }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            // dB = A^T dY
            for (index_t g = 0; g < batch; ++g) {
                const std::size_t ab = detail::uz(g * M * K);
                const std::size_t bb = detail::uz(g * K * N);
                const std::size_t yb = detail::uz(g * M * N);
                for (index_t m = 0; m < M; ++m) {
                    for (index_t k = 0; k < K; ++k) {
                        const T av = an->value[ab + detail::uz(m * K + k)];
                        if (av == T(0)) continue;
                        for (index_t nn = 0; nn < N; ++nn)
                            bn->grad[bb + detail::uz(k * N + nn)] +=
                                av * on->grad[yb + detail::uz(m * N + nn)];
                    }
                }
            }
        }
    };
    return Tensor<T>(std::move(node));
}

// Cross-correlation with odd kernel and same zero-padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& K, const Tensor<T>& b) {
    if (x.ndim() != 4 || K.ndim() != 4) {
        throw dimension_error("conv2d: expected 4-d input and kernel, got " +
                              shape_str(x.shape()) + " and " +
                              shape_str(K.shape()));
    }
    const index_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const index_t Cout = K.dim(0), k = K.dim(2);
    if (K.dim(1) != C) {
        throw dimension_error("conv2d: channel mismatch, input " +
                              shape_str(x.shape()) + " kernel " +
                              shape_str(K.shape()));
    }
    if (K.dim(3) != k || k % 2 == 0) {
        throw dimension_error("conv2d: kernel must be square with odd size, got " +
                              shape_str(K.shape()));
    }
    if (b.size() != Cout) {
        throw dimension_error("conv2d: bias length does not match kernel " +
                              shape_str(K.shape()));
    }
    const index_t pad = (k - 1) / 2;
    std::vector<T> y(detail::uz(B * Cout * H * W));
    const auto& xd = x.data();
    const auto& kd = K.data();
    const auto& bd = b.data();
    auto xat = [&](index_t bb, index_t c, index_t i, index_t j) -> T {
        if (i < 0 || i >= H || j < 0 || j >= W) return T(0);
        return xd[detail::uz(((bb * C + c) * H + i) * W + j)];
    };
    for (index_t bb = 0; bb < B; ++bb)
        for (index_t co = 0; co < Cout; ++co)
            for (index_t i = 0; i < H; ++i)
                for (index_t j = 0; j < W; ++j) {
                    double acc = static_cast<double>(bd[detail::uz(co)]);
                    for (index_t c = 0; c < C; ++c)
                        for (index_t di = 0; di < k; ++di)
                            for (index_t dj = 0; dj < k; ++dj)
                                acc += static_cast<double>(
                                           xat(bb, c, i + di - pad, j + dj - pad)) *
                                       static_cast<double>(kd[detail::uz(
                                           ((co * C + c) * k + di) * k + dj)]);
                    y[detail::uz(((bb * Cout + co) * H + i) * W + j)] =
                        static_cast<T>(acc);
                }
    auto node = detail::make_result<T>({B, Cout, H, W}, std::move(y),
                                       {x.node(), K.node(), b.node()}, "conv2d");
    auto *xn = x.raw(), *kn = K.raw(), *bn = b.raw(), *on = node.get();
    node->backward = [xn, kn, bn, on, B, C, H, W, Cout, k, pad] {
        auto xidx = [&](index_t bb, index_t c, index_t i, index_t j) {
            return detail::uz(((bb * C + c) * H + i) * W + j);
        };
        for (index_t bb = 0; bb < B; ++bb)
            for (index_t co = 0; co < Cout; ++co)
                for (index_t i = 0; i < H; ++i)
                    for (index_t j = 0; j < W; ++j) {
                        const T g = on->grad[detail::uz(
                            ((bb * Cout + co) * H + i) * W + j)];
                        if (g == T(0)) continue;
                        if (bn->requires_grad) {
                            bn->ensure_grad();
                            bn->grad[detail::uz(co)] += g;
                        }
                        for (index_t c = 0; c < C; ++c)
                            for (index_t di = 0; di < k; ++di)
                                for (index_t dj = 0; dj < k; ++dj) {
                                    const index_t ii = i + di - pad;
                                    const index_t jj = j + dj - pad;
                                    if (ii < 0 || ii >= H || jj < 0 || jj >= W)
                                        continue;
                                    const std::size_t kk = detail::uz(
                                        ((co * C + c) * k + di) * k + dj);
                                    if (xn->requires_grad) {
                                        xn->ensure_grad();
                                        xn->grad[xidx(bb, c, ii, jj)] +=
                                            g * kn->value[kk];
                                    }
                                    if (kn->requires_grad) {
                                        kn->ensure_grad();
                                        kn->grad[kk] +=
                                            g * xn->value[xidx(bb, c, ii, jj)];
                                    }
                                }
                    }
    };
    return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
    if (parts.empty()) throw dimension_error("concat: no inputs");
    const int nd = parts[0].ndim();
    if (axis < 0) axis += nd;
    Shape oshape = parts[0].shape();
    index_t total = 0;
    for (const auto& p : parts) {
        if (p.ndim() != nd)
            throw dimension_error("concat: rank mismatch");
        for (int i = 0; i < nd; ++i) {
            if (i != axis && p.shape()[detail::uz(i)] != oshape[detail::uz(i)])
                throw dimension_error("concat: shape mismatch " +
                                      shape_str(p.shape()) + " vs " +
                                      shape_str(oshape));
        }
        total += p.dim(axis);
    }
    oshape[detail::uz(axis)] = total;

    // outer x axis x inner layout
    index_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= oshape[detail::uz(i)];
    for (int i = axis + 1; i < nd; ++i) inner *= oshape[detail::uz(i)];

    std::vector<T> y(detail::uz(numel(oshape)));
    std::vector<index_t> offsets;  // start of each part along axis
    {
        index_t off = 0;
        for (const auto& p : parts) {
            offsets.push_back(off);
            const index_t len = p.dim(axis);
            const auto& pd = p.data();
            for (index_t o = 0; o < outer; ++o) {
                const std::size_t src = detail::uz(o * len * inner);
                const std::size_t dst = detail::uz((o * total + off) * inner);
                std::copy(pd.begin() + static_cast<std::ptrdiff_t>(src),
                          pd.begin() + static_cast<std::ptrdiff_t>(src + detail::uz(len * inner)),
                          y.begin() + static_cast<std::ptrdiff_t>(dst));
            }
            off += len;
        }
    }
    std::vector<std::shared_ptr<detail::Node<T>>> pnodes;
    for (const auto& p : parts) pnodes.push_back(p.node());
    auto node = detail::make_result<T>(std::move(oshape), std::move(y),
                                       std::move(pnodes), "concat");
    std::vector<detail::Node<T>*> praw;
    std::vector<index_t> lens;
    for (const auto& p : parts) {
        praw.push_back(p.raw());
        lens.push_back(p.dim(axis));
    }
    auto* on = node.get();
    node->backward = [praw, lens, offsets, on, outer, inner, total] {
        for (std::size_t pi = 0; pi < praw.size(); ++pi) {
            auto* pn = praw[pi];
            if (!pn->requires_grad) continue;
            pn->ensure_grad();
            const index_t len = lens[pi];
            const index_t off = offsets[pi];
            for (index_t o = 0; o < outer; ++o) {
                const std::size_t dst = detail::uz(o * len * inner);
                const std::size_t src = detail::uz((o * total + off) * inner);
                for (index_t q = 0; q < len * inner; ++q)
                    pn->grad[dst + detail::uz(q)] += on->grad[src + detail::uz(q)];
            }
        }
    };
    return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, index_t start, index_t len) {
    const int nd = x.ndim();
    if (axis < 0) axis += nd;
    const index_t extent = x.dim(axis);
    if (start < 0 || len <= 0 || start + len > extent) {
        throw dimension_error("slice: range [" + std::to_string(start) + "," +
                              std::to_string(start + len) + ") outside axis " +
                              std::to_string(axis) + " of " +
                              shape_str(x.shape()));
    }
    Shape oshape = x.shape();
    oshape[detail::uz(axis)] = len;
    index_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.shape()[detail::uz(i)];
    for (int i = axis + 1; i < nd; ++i) inner *= x.shape()[detail::uz(i)];
    std::vector<T> y(detail::uz(numel(oshape)));
    const auto& xd = x.data();
    for (index_t o = 0; o < outer; ++o) {
        const std::size_t src = detail::uz((o * extent + start) * inner);
        const std::size_t dst = detail::uz(o * len * inner);
        std::copy(xd.begin() + static_cast<std::ptrdiff_t>(src),
                  xd.begin() + static_cast<std::ptrdiff_t>(src + detail::uz(len * inner)),
                  y.begin() + static_cast<std::ptrdiff_t>(dst));
    }
    auto node = detail::make_result<T>(std::move(oshape), std::move(y),
                                       {x.node()}, "slice");
    auto *xn = x.raw(), *on = node.get();
    node->backward = [xn, on, outer, inner, extent, start, len] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (index_t o = 0; o < outer; ++o) {
            const std::size_t dst = detail::uz((o * extent + start) * inner);
            const std::size_t src = detail::uz(o * len * inner);
            for (index_t q = 0; q < len * inner; ++q)
                xn->grad[dst + detail::uz(q)] += on->grad[src + detail::uz(q)];
        }
    };
    return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (numel(shape) != x.size()) {
        throw dimension_error("reshape: cannot view " + shape_str(x.shape()) +
                              " as " + shape_str(shape));
    }
    std::vector<T> y(x.data());
    auto node = detail::make_result<T>(std::move(shape), std::move(y),
                                       {x.node()}, "reshape");
    auto *xn = x.raw(), *on = node.get();
    node->backward = [xn, on] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i)
            xn->grad[i] += on->grad[i];
    };
    return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& axes) {
    const int nd = x.ndim();
    if (static_cast<int>(axes.size()) != nd)
        throw dimension_error("permute: axes count mismatch");
    Shape oshape(detail::uz(nd));
    for (int i = 0; i < nd; ++i)
        oshape[detail::uz(i)] = x.shape()[detail::uz(axes[detail::uz(i)])];
    std::vector<index_t> istr(detail::uz(nd), 1), ostr(detail::uz(nd), 1);
    for (int i = nd - 2; i >= 0; --i)
        istr[detail::uz(i)] = istr[detail::uz(i + 1)] * x.shape()[detail::uz(i + 1)];
    for (int i = nd - 2; i >= 0; --i)
        ostr[detail::uz(i)] = ostr[detail::uz(i + 1)] * oshape[detail::uz(i + 1)];
    const index_t n = x.size();
    std::vector<T> y(detail::uz(n));
    const auto& xd = x.data();
    // map output flat index -> input flat index
    std::vector<index_t> src_stride(detail::uz(nd));
    for (int i = 0; i < nd; ++i)
        src_stride[detail::uz(i)] = istr[detail::uz(axes[detail::uz(i)])];
    for (index_t o = 0; o < n; ++o) {
        index_t rem = o, src = 0;
        for (int i = 0; i < nd; ++i) {
            const index_t c = rem / ostr[detail::uz(i)];
            rem -= c * ostr[detail::uz(i)];
            src += c * src_stride[detail::uz(i)];
        }
        y[detail::uz(o)] = xd[detail::uz(src)];
    }
    auto node = detail::make_result<T>(std::move(oshape), std::move(y),
                                       {x.node()}, "permute");
    auto *xn = x.raw(), *on = node.get();
    node->backward = [xn, on, ostr, src_stride, n, nd] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (index_t o = 0; o < n; ++o) {
            index_t rem = o, src = 0;
            for (int i = 0; i < nd; ++i) {
                const index_t c = rem / ostr[detail::uz(i)];
                rem -= c * ostr[detail::uz(i)];
                src += c * src_stride[detail::uz(i)];
            }
            xn->grad[detail::uz(src)] += on->grad[detail::uz(o)];
        }
    };
    return Tensor<T>(std::move(node));
}

// [B,D] -> [B,D,h,w] by spatial broadcast.
template <typename T>
Tensor<T> broadcast_map(const Tensor<T>& f, index_t h, index_t w) {
    if (f.ndim() != 2)
        throw dimension_error("broadcast_map: expected [B,D], got " +
                              shape_str(f.shape()));
    const index_t B = f.dim(0), D = f.dim(1);
    std::vector<T> y(detail::uz(B * D * h * w));
    const auto& fd = f.data();
    for (index_t b = 0; b < B; ++b)
        for (index_t d = 0; d < D; ++d) {
            const T v = fd[detail::uz(b * D + d)];
            const std::size_t base = detail::uz((b * D + d) * h * w);
            for (index_t q = 0; q < h * w; ++q) y[base + detail::uz(q)] = v;
        }
    auto node = detail::make_result<T>({B, D, h, w}, std::move(y), {f.node()},
                                       "broadcast_map");
    auto *fn = f.raw(), *on = node.get();
    node->backward = [fn, on, B, D, h, w] {
        if (!fn->requires_grad) return;
        fn->ensure_grad();
        for (index_t b = 0; b < B; ++b)
            for (index_t d = 0; d < D; ++d) {
                double acc = 0.0;
                const std::size_t base = detail::uz((b * D + d) * h * w);
                for (index_t q = 0; q < h * w; ++q)
                    acc += static_cast<double>(on->grad[base + detail::uz(q)]);
                fn->grad[detail::uz(b * D + d)] += static_cast<T>(acc);
            }
    };
    return Tensor<T>(std::move(node));
}

// Learnable token [d] -> [B,1,d].
template <typename T>
Tensor<T> expand_token(const Tensor<T>& t, index_t B) {
    const index_t d = t.size();
    std::vector<T> y(detail::uz(B * d));
    for (index_t b = 0; b < B; ++b)
        std::copy(t.data().begin(), t.data().end(),
                  y.begin() + static_cast<std::ptrdiff_t>(b * d));
    auto node = detail::make_result<T>({B, 1, d}, std::move(y), {t.node()},
                                       "expand_token");
    auto *tn = t.raw(), *on = node.get();
    node->backward = [tn, on, B, d] {
        if (!tn->requires_grad) return;
        tn->ensure_grad();
        for (index_t b = 0; b < B; ++b)
            for (index_t j = 0; j < d; ++j)
                tn->grad[detail::uz(j)] += on->grad[detail::uz(b * d + j)];
    };
    return Tensor<T>(std::move(node));
}

// x[B,T,d] + pos[T,d] broadcast over batch.
template <typename T>
Tensor<T> add_broadcast_rows(const Tensor<T>& x, const Tensor<T>& pos) {
    if (x.ndim() != 3 || pos.ndim() != 2 || x.dim(1) != pos.dim(0) ||
        x.dim(2) != pos.dim(1)) {
        throw dimension_error("add_broadcast_rows: " + shape_str(x.shape()) +
                              " vs " + shape_str(pos.shape()));
    }
    const index_t B = x.dim(0), Td = pos.size();
    std::vector<T> y(x.data());
    const auto& pd = pos.data();
    for (index_t b = 0; b < B; ++b)
        for (index_t q = 0; q < Td; ++q)
            y[detail::uz(b * Td + q)] += pd[detail::uz(q)];
    auto node = detail::make_result<T>(x.shape(), std::move(y),
                                       {x.node(), pos.node()},
                                       "add_broadcast_rows");
    auto *xn = x.raw(), *pn = pos.raw(), *on = node.get();
    node->backward = [xn, pn, on, B, Td] {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                xn->grad[i] += on->grad[i];
        }
        if (pn->requires_grad) {
            pn->ensure_grad();
            for (index_t b = 0; b < B; ++b)
                for (index_t q = 0; q < Td; ++q)
                    pn->grad[detail::uz(q)] += on->grad[detail::uz(b * Td + q)];
        }
    };
    return Tensor<T>(std::move(node));
}

// Bilinear sampling of F [B,C,H,W] at normalized grid G [B,Ho,Wo,2]
// (last axis is (x, y)). Align-corners mapping u = (x+1)/2 * (W-1);
// coordinates outside the map clamp to the border before weighting.
// Gradients flow to both F and G; coordinate gradients are zero in the
// clamped (saturated) region.
template <typename T>
Tensor<T> grid_sample_bilinear(const Tensor<T>& F, const Tensor<T>& G) {
    if (F.ndim() != 4 || G.ndim() != 4 || G.dim(-1) != 2 ||
        F.dim(0) != G.dim(0)) {
        throw dimension_error("grid_sample: feature " + shape_str(F.shape()) +
                              " grid " + shape_str(G.shape()));
    }
    const index_t B = F.dim(0), C = F.dim(1), H = F.dim(2), W = F.dim(3);
    const index_t Ho = G.dim(1), Wo = G.dim(2);
    std::vector<T> y(detail::uz(B * C * Ho * Wo));
    const auto& fd = F.data();
    const auto& gd = G.data();
    auto fat = [&](index_t b, index_t c, index_t i, index_t j) -> double {
        return static_cast<double>(fd[detail::uz(((b * C + c) * H + i) * W + j)]);
    };
    for (index_t b = 0; b < B; ++b)
        for (index_t i = 0; i < Ho; ++i)
            for (index_t j = 0; j < Wo; ++j) {
                const std::size_t gi = detail::uz(((b * Ho + i) * Wo + j) * 2);
                const double u =
                    (static_cast<double>(gd[gi]) + 1.0) * 0.5 *
                    static_cast<double>(W - 1);
                const double v =
                    (static_cast<double>(gd[gi + 1]) + 1.0) * 0.5 *
                    static_cast<double>(H - 1);
                const double uc = std::min(std::max(u, 0.0),
                                           static_cast<double>(W - 1));
                const double vc = std::min(std::max(v, 0.0),
                                           static_cast<double>(H - 1));
                const index_t x0 = static_cast<index_t>(std::floor(uc));
                const index_t y0 = static_cast<index_t>(std::floor(vc));
                const index_t x1 = std::min(x0 + 1, W - 1);
                const index_t y1 = std::min(y0 + 1, H - 1);
                const double fx = uc - static_cast<double>(x0);
                const double fy = vc - static_cast<double>(y0);
                for (index_t c = 0; c < C; ++c) {
                    const double val =
                        fat(b, c, y0, x0) * (1 - fy) * (1 - fx) +
                        fat(b, c, y0, x1) * (1 - fy) * fx +
                        fat(b, c, y1, x0) * fy * (1 - fx) +
                        fat(b, c, y1, x1) * fy * fx;
                    y[detail::uz(((b * C + c) * Ho + i) * Wo + j)] =
                        static_cast<T>(val);
                }
            }
    auto node = detail::make_result<T>({B, C, Ho, Wo}, std::move(y),
                                       {F.node(), G.node()}, "grid_sample");
    auto *fn = F.raw(), *gn = G.raw(), *on = node.get();
    node->backward = [fn, gn, on, B, C, H, W, Ho, Wo] {
        auto fidx = [&](index_t b, index_t c, index_t i, index_t j) {
            return detail::uz(((b * C + c) * H + i) * W + j);
        };
        for (index_t b = 0; b < B; ++b)
            for (index_t i = 0; i < Ho; ++i)
                for (index_t j = 0; j < Wo; ++j) {
                    const std::size_t gi =
                        detail::uz(((b * Ho + i) * Wo + j) * 2);
                    const double u =
                        (static_cast<double>(gn->value[gi]) + 1.0) * 0.5 *
                        static_cast<double>(W - 1);
                    const double v =
                        (static_cast<double>(gn->value[gi + 1]) + 1.0) * 0.5 *
                        static_cast<double>(H - 1);
                    const double uc = std::min(std::max(u, 0.0),
                                               static_cast<double>(W - 1));
                    const double vc = std::min(std::max(v, 0.0),
                                               static_cast<double>(H - 1));
                    const index_t x0 = static_cast<index_t>(std::floor(uc));
                    const index_t y0 = static_cast<index_t>(std::floor(vc));
                    const index_t x1 = std::min(x0 + 1, W - 1);
                    const index_t y1 = std::min(y0 + 1, H - 1);
                    const double fx = uc - static_cast<double>(x0);
                    const double fy = vc - static_cast<double>(y0);
                    const bool u_in = (u > 0.0) && (u < static_cast<double>(W - 1));
                    const bool v_in = (v > 0.0) && (v < static_cast<double>(H - 1));
                    double du_acc = 0.0, dv_acc = 0.0;
                    for (index_t c = 0; c < C; ++c) {
                        const double g = static_cast<double>(
                            on->grad[detail::uz(((b * C + c) * Ho + i) * Wo + j)]);
                        if (g == 0.0) continue;
                        const double f00 =
                            static_cast<double>(fn->value[fidx(b, c, y0, x0)]);
                        const double f01 =
                            static_cast<double>(fn->value[fidx(b, c, y0, x1)]);
                        const double f10 =
                            static_cast<double>(fn->value[fidx(b, c, y1, x0)]);
                        const double f11 =
                            static_cast<double>(fn->value[fidx(b, c, y1, x1)]);
                        if (fn->requires_grad) {
                            fn->ensure_grad();
                            fn->grad[fidx(b, c, y0, x0)] +=
                                static_cast<T>(g * (1 - fy) * (1 - fx));
                            fn->grad[fidx(b, c, y0, x1)] +=
                                static_cast<T>(g * (1 - fy) * fx);
                            fn->grad[fidx(b, c, y1, x0)] +=
                                static_cast<T>(g * fy * (1 - fx));
                            fn->grad[fidx(b, c, y1, x1)] +=
                                static_cast<T>(g * fy * fx);
                        }
                        if (gn->requires_grad) {
                            du_acc += g * ((1 - fy) * (f01 - f00) +
                                           fy * (f11 - f10));
                            dv_acc += g * ((1 - fx) * (f10 - f00) +
                                           fx * (f11 - f01));
                        }
                    }
                    if (gn->requires_grad) {
                        gn->ensure_grad();
                        if (u_in)
                            gn->grad[gi] += static_cast<T>(
                                du_acc * 0.5 * static_cast<double>(W - 1));
                        if (v_in)
                            gn->grad[gi + 1] += static_cast<T>(
                                dv_acc * 0.5 * static_cast<double>(H - 1));
                    }
                }
    };
    return Tensor<T>(std::move(node));
}

// Generalized-mean pooling over the spatial axes:
//   y[b,c] = (mean_ij max(F[b,c,i,j], eps)^p)^(1/p).
// p is a trainable 1-element tensor; p=1 is average pooling, large p
// approaches max pooling.
template <typename T>
Tensor<T> gem_pool(const Tensor<T>& F, const Tensor<T>& p, double eps = 1e-6) {
    if (F.ndim() != 4)
        throw dimension_error("gem_pool: expected [B,C,H,W], got " +
                              shape_str(F.shape()));
    if (p.size() != 1)
        throw dimension_error("gem_pool: p must be a single element");
    const double pv = static_cast<double>(p.data()[0]);
    if (pv <= 0.0)
        throw config_error("gem_pool: p must be positive, got " +
                           std::to_string(pv));
    const index_t B = F.dim(0), C = F.dim(1), HW = F.dim(2) * F.dim(3);
    std::vector<T> y(detail::uz(B * C));
    const auto& fd = F.data();
    for (index_t bc = 0; bc < B * C; ++bc) {
        double m = 0.0;
        const std::size_t base = detail::uz(bc * HW);
        for (index_t q = 0; q < HW; ++q) {
            const double z =
                std::max(static_cast<double>(fd[base + detail::uz(q)]), eps);
            m += std::pow(z, pv);
        }
        m /= static_cast<double>(HW);
        y[detail::uz(bc)] = static_cast<T>(std::pow(m, 1.0 / pv));
    }
    auto node = detail::make_result<T>({B, C}, std::move(y),
                                       {F.node(), p.node()}, "gem_pool");
    auto *fn = F.raw(), *pn = p.raw(), *on = node.get();
    node->backward = [fn, pn, on, B, C, HW, eps] {
        const double pv = static_cast<double>(pn->value[0]);
        for (index_t bc = 0; bc < B * C; ++bc) {
            const double g = static_cast<double>(on->grad[detail::uz(bc)]);
            if (g == 0.0) continue;
            const std::size_t base = detail::uz(bc * HW);
            double m = 0.0, mlog = 0.0;
            for (index_t q = 0; q < HW; ++q) {
                const double z = std::max(
                    static_cast<double>(fn->value[base + detail::uz(q)]), eps);
                const double zp = std::pow(z, pv);
                m += zp;
                mlog += zp * std::log(z);
            }
            m /= static_cast<double>(HW);
            mlog /= static_cast<double>(HW);
            const double yv = std::pow(m, 1.0 / pv);
            if (fn->requires_grad) {
                fn->ensure_grad();
                const double scale =
                    std::pow(m, 1.0 / pv - 1.0) / static_cast<double>(HW);
                for (index_t q = 0; q < HW; ++q) {
                    const double raw =
                        static_cast<double>(fn->value[base + detail::uz(q)]);
                    if (raw <= eps) continue;  // clamp saturates
                    fn->grad[base + detail::uz(q)] += static_cast<T>(
                        g * scale * std::pow(raw, pv - 1.0));
                }
            }
            if (pn->requires_grad) {
                pn->ensure_grad();
                // d/dp of exp(log(m)/p): y * ( (sum z^p log z)/(p m n_norm) - log(m)/p^2 )
                const double dp =
                    yv * (mlog / (pv * m) - std::log(m) / (pv * pv));
                pn->grad[0] += static_cast<T>(g * dp);
            }
        }
    };
    return Tensor<T>(std::move(node));
}

// Rows of the last axis scaled to unit L2 norm; zero rows stay zero.
template <typename T>
Tensor<T> l2_normalize_lastaxis(const Tensor<T>& x, double eps = 1e-12) {
    const index_t d = x.dim(-1);
    const index_t rows = x.size() / d;
    std::vector<T> y(x.data().size());
    const auto& xd = x.data();
    for (index_t r = 0; r < rows; ++r) {
        const std::size_t base = detail::uz(r * d);
        double nrm = 0.0;
        for (index_t j = 0; j < d; ++j) {
            const double v = static_cast<double>(xd[base + detail::uz(j)]);
            nrm += v * v;
        }
        nrm = std::sqrt(nrm);
        const double denom = std::max(nrm, eps);
        for (index_t j = 0; j < d; ++j)
            y[base + detail::uz(j)] = static_cast<T>(
                static_cast<double>(xd[base + detail::uz(j)]) / denom);
    }
    auto node = detail::make_result<T>(x.shape(), std::move(y), {x.node()},
                                       "l2_normalize");
    auto *xn = x.raw(), *on = node.get();
    node->backward = [xn, on, d, rows, eps] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (index_t r = 0; r < rows; ++r) {
            const std::size_t base = detail::uz(r * d);
            double nrm = 0.0;
            for (index_t j = 0; j < d; ++j) {
                const double v =
                    static_cast<double>(xn->value[base + detail::uz(j)]);
                nrm += v * v;
            }
            nrm = std::sqrt(nrm);
            if (nrm > eps) {
                double dot = 0.0;
                for (index_t j = 0; j < d; ++j)
                    dot += static_cast<double>(on->grad[base + detail::uz(j)]) *
                           static_cast<double>(xn->value[base + detail::uz(j)]);
                const double inv = 1.0 / nrm;
                const double inv3 = inv * inv * inv;
                for (index_t j = 0; j < d; ++j) {
                    const std::size_t k = base + detail::uz(j);
                    xn->grad[k] += static_cast<T>(
                        static_cast<double>(on->grad[k]) * inv -
                        static_cast<double>(xn->value[k]) * dot * inv3);
                }
            } else {
                for (index_t j = 0; j < d; ++j) {
                    const std::size_t k = base + detail::uz(j);
                    xn->grad[k] += static_cast<T>(
                        static_cast<double>(on->grad[k]) / eps);
                }
            }
        }
    };
    return Tensor<T>(std::move(node));
}

// Scalar mean of elementwise squared difference.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "mse_loss");
    const index_t n = a.size();
    double acc = 0.0;
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (index_t i = 0; i < n; ++i) {
        const double diff = static_cast<double>(ad[detail::uz(i)]) -
                            static_cast<double>(bd[detail::uz(i)]);
        acc += diff * diff;
    }
    std::vector<T> y{static_cast<T>(acc / static_cast<double>(n))};
    auto node = detail::make_result<T>({1}, std::move(y),
                                       {a.node(), b.node()}, "mse_loss");
    auto *an = a.raw(), *bn = b.raw(), *on = node.get();
    node->backward = [an, bn, on, n] {
        const double g = static_cast<double>(on->grad[0]);
        const double scale = 2.0 * g / static_cast<double>(n);
        if (an->requires_grad) {
            an->ensure_grad();
            for (index_t i = 0; i < n; ++i)
                an->grad[detail::uz(i)] += static_cast<T>(
                    scale * (static_cast<double>(an->value[detail::uz(i)]) -
                             static_cast<double>(bn->value[detail::uz(i)])));
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (index_t i = 0; i < n; ++i)
                bn->grad[detail::uz(i)] -= static_cast<T>(
                    scale * (static_cast<double>(an->value[detail::uz(i)]) -
                             static_cast<double>(bn->value[detail::uz(i)])));
        }
    };
    return Tensor<T>(std::move(node));
}

// y[b,:] = sum_s w[b,s] * x[b,s,:] with constant weights.
template <typename T>
Tensor<T> weighted_sum_axis1(const Tensor<T>& x, const std::vector<double>& w) {
    if (x.ndim() != 3)
        throw dimension_error("weighted_sum_axis1: expected [B,S,D], got " +
                              shape_str(x.shape()));
    const index_t B = x.dim(0), S = x.dim(1), D = x.dim(2);
    if (static_cast<index_t>(w.size()) != B * S)
        throw dimension_error("weighted_sum_axis1: weight length mismatch");
    std::vector<T> y(detail::uz(B * D), T(0));
    const auto& xd = x.data();
    for (index_t b = 0; b < B; ++b)
        for (index_t s = 0; s < S; ++s) {
            const double wv = w[detail::uz(b * S + s)];
            if (wv == 0.0) continue;
            const std::size_t xb = detail::uz((b * S + s) * D);
            const std::size_t yb = detail::uz(b * D);
            for (index_t q = 0; q < D; ++q)
                y[yb + detail::uz(q)] += static_cast<T>(
                    wv * static_cast<double>(xd[xb + detail::uz(q)]));
        }
    auto node = detail::make_result<T>({B, D}, std::move(y), {x.node()},
                                       "weighted_sum_axis1");
    auto *xn = x.raw(), *on = node.get();
    node->backward = [xn, on, w, B, S, D] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (index_t b = 0; b < B; ++b)
            for (index_t s = 0; s < S; ++s) {
                const double wv = w[detail::uz(b * S + s)];
                if (wv == 0.0) continue;
                const std::size_t xb = detail::uz((b * S + s) * D);
                const std::size_t yb = detail::uz(b * D);
                for (index_t q = 0; q < D; ++q)
                    xn->grad[xb + detail::uz(q)] += static_cast<T>(
                        wv * static_cast<double>(on->grad[yb + detail::uz(q)]));
            }
    };
    return Tensor<T>(std::move(node));
}

// Per-row constant gate: y[b,:] = g[b] * x[b,:].
template <typename T>
Tensor<T> scale_rows(const Tensor<T>& x, const std::vector<double>& g) {
    if (x.ndim() != 2 || static_cast<index_t>(g.size()) != x.dim(0))
        throw dimension_error("scale_rows: gate length mismatch for " +
                              shape_str(x.shape()));
    const index_t B = x.dim(0), D = x.dim(1);
    std::vector<T> y(detail::uz(B * D));
    const auto& xd = x.data();
    for (index_t b = 0; b < B; ++b)
        for (index_t q = 0; q < D; ++q)
            y[detail::uz(b * D + q)] = static_cast<T>(
                g[detail::uz(b)] * static_cast<double>(xd[detail::uz(b * D + q)]));
    auto node = detail::make_result<T>(x.shape(), std::move(y), {x.node()},
                                       "scale_rows");
    auto *xn = x.raw(), *on = node.get();
    node->backward = [xn, on, g, B, D] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (index_t b = 0; b < B; ++b)
            for (index_t q = 0; q < D; ++q)
                xn->grad[detail::uz(b * D + q)] += static_cast<T>(
                    g[detail::uz(b)] *
                    static_cast<double>(on->grad[detail::uz(b * D + q)]));
    };
    return Tensor<T>(std::move(node));
}

// Non-overlapping patch extraction: [B,C,H,W] -> [B,P,C*ps*ps], patches in
// row-major order, inner layout (c, dy, dx).
template <typename T>
Tensor<T> im2patches(const Tensor<T>& x, index_t ps) {
    if (x.ndim() != 4)
        throw dimension_error("im2patches: expected [B,C,H,W], got " +
                              shape_str(x.shape()));
    const index_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H % ps != 0 || W % ps != 0)
        throw config_error("im2patches: image " + shape_str(x.shape()) +
                           " not divisible by patch size " + std::to_string(ps));
    const index_t gh = H / ps, gw = W / ps, P = gh * gw, inner = C * ps * ps;
    std::vector<T> y(detail::uz(B * P * inner));
    const auto& xd = x.data();
    for (index_t b = 0; b < B; ++b)
        for (index_t py = 0; py < gh; ++py)
            for (index_t px = 0; px < gw; ++px) {
                const index_t p = py * gw + px;
                for (index_t c = 0; c < C; ++c)
                    for (index_t dy = 0; dy < ps; ++dy)
                        for (index_t dx = 0; dx < ps; ++dx) {
                            const std::size_t src = detail::uz(
                                ((b * C + c) * H + py * ps + dy) * W +
                                px * ps + dx);
                            const std::size_t dst = detail::uz(
                                (b * P + p) * inner + (c * ps + dy) * ps + dx);
                            y[dst] = xd[src];
                        }
            }
    auto node = detail::make_result<T>({B, P, inner}, std::move(y), {x.node()},
                                       "im2patches");
    auto *xn = x.raw(), *on = node.get();
    node->backward = [xn, on, B, C, H, W, ps, gh, gw, P, inner] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (index_t b = 0; b < B; ++b)
            for (index_t py = 0; py < gh; ++py)
                for (index_t px = 0; px < gw; ++px) {
                    const index_t p = py * gw + px;
                    for (index_t c = 0; c < C; ++c)
                        for (index_t dy = 0; dy < ps; ++dy)
                            for (index_t dx = 0; dx < ps; ++dx) {
                                const std::size_t src = detail::uz(
                                    ((b * C + c) * H + py * ps + dy) * W +
                                    px * ps + dx);
                                const std::size_t dst = detail::uz(
                                    (b * P + p) * inner +
                                    (c * ps + dy) * ps + dx);
                                xn->grad[src] += on->grad[dst];
                            }
                }
    };
    return Tensor<T>(std::move(node));
}

// Scalar y = sum_i w_i * x_i with constant weights.
template <typename T>
Tensor<T> dot_const(const Tensor<T>& x, const std::vector<double>& w) {
    if (static_cast<index_t>(w.size()) != x.size())
        throw dimension_error("dot_const: weight length " +
                              std::to_string(w.size()) + " vs tensor " +
                              shape_str(x.shape()));
    double acc = 0.0;
    const auto& xd = x.data();
    for (std::size_t i = 0; i < xd.size(); ++i)
        acc += w[i] * static_cast<double>(xd[i]);
    std::vector<T> y{static_cast<T>(acc)};
    auto node = detail::make_result<T>({1}, std::move(y), {x.node()},
                                       "dot_const");
    auto *xn = x.raw(), *on = node.get();
    node->backward = [xn, on, w] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const double g = static_cast<double>(on->grad[0]);
        for (std::size_t i = 0; i < xn->grad.size(); ++i)
            xn->grad[i] += static_cast<T>(g * w[i]);
    };
    return Tensor<T>(std::move(node));
}

// --- multi-head self-attention (composite) ---

template <typename T>
struct AttnParams {
    Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

// Standard multi-head self-attention with output projection over [B,T,d].
template <typename T>
Tensor<T> mhsa(const Tensor<T>& x, const AttnParams<T>& p, int heads) {
    if (x.ndim() != 3)
        throw dimension_error("mhsa: expected [B,T,d], got " +
                              shape_str(x.shape()));
    const index_t B = x.dim(0), Tn = x.dim(1), d = x.dim(2);
    if (heads <= 0 || d % heads != 0)
        throw config_error("mhsa: model dim " + std::to_string(d) +
                           " not divisible by heads " + std::to_string(heads));
    const index_t dh = d / heads;
    auto split = [&](const Tensor<T>& z) {
        return permute(reshape(z, {B, Tn, heads, dh}), {0, 2, 1, 3});
    };
    Tensor<T> q = split(linear(x, p.wq, p.bq));
    Tensor<T> k = split(linear(x, p.wk, p.bk));
    Tensor<T> v = split(linear(x, p.wv, p.bv));
    Tensor<T> scores = affine(matmul(q, permute(k, {0, 1, 3, 2})),
                              1.0 / std::sqrt(static_cast<double>(dh)), 0.0);
    Tensor<T> attn = softmax_lastaxis(scores);
    Tensor<T> ctx = reshape(permute(matmul(attn, v), {0, 2, 1, 3}), {B, Tn, d});
    return linear(ctx, p.wo, p.bo);
}

}  // namespace vpr
