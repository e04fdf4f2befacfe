#pragma once

// Shared fixtures and independent oracles for the test and acceptance
// suites. Oracles here are deliberately written as direct scalar
// re-implementations, separate from the library's code paths.

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "vpr/grad_check.hpp"
#include "vpr/losses.hpp"
#include "vpr/ops.hpp"

namespace vprtest {

using vpr::index_t;
using vpr::RngState;
using vpr::Shape;
using vpr::Tensor;

inline Tensor<double> rand_tensor(Shape shape, RngState& rng,
                                  double lo = -1.0, double hi = 1.0) {
    auto t = Tensor<double>::zeros(shape);
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

inline std::vector<double> rand_weights(index_t n, RngState& rng) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    return w;
}

// ---- independent oracles ----

// six-loop cross-correlation with zero padding
inline std::vector<double> conv2d_oracle(const std::vector<double>& x,
                                         const std::vector<double>& k,
                                         const std::vector<double>& bias,
                                         int B, int C, int H, int W, int Cout,
                                         int ks) {
    const int pad = (ks - 1) / 2;
    std::vector<double> y(static_cast<std::size_t>(B) * Cout * H * W, 0.0);
    for (int b = 0; b < B; ++b)
        for (int co = 0; co < Cout; ++co)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    double acc = bias[static_cast<std::size_t>(co)];
                    for (int c = 0; c < C; ++c)
                        for (int di = 0; di < ks; ++di)
                            for (int dj = 0; dj < ks; ++dj) {
                                const int ii = i + di - pad;
                                const int jj = j + dj - pad;
                                if (ii < 0 || ii >= H || jj < 0 || jj >= W)
                                    continue;
                                acc += x[static_cast<std::size_t>(
                                           ((b * C + c) * H + ii) * W + jj)] *
                                       k[static_cast<std::size_t>(
                                           ((co * C + c) * ks + di) * ks + dj)];
                            }
                    y[static_cast<std::size_t>(((b * Cout + co) * H + i) * W +
                                               j)] = acc;
                }
    return y;
}

// scalar bilinear interpolation at one normalized point (align-corners,
// border clamp)
inline double bilinear_oracle(const std::vector<double>& f, int H, int W,
                              double xn, double yn) {
    auto clampd = [](double v, double lo, double hi) {
        return v < lo ? lo : (v > hi ? hi : v);
    };
    const double u = clampd((xn + 1.0) * 0.5 * (W - 1), 0.0, double(W - 1));
    const double v = clampd((yn + 1.0) * 0.5 * (H - 1), 0.0, double(H - 1));
    const int x0 = static_cast<int>(std::floor(u));
    const int y0 = static_cast<int>(std::floor(v));
    const int x1 = std::min(x0 + 1, W - 1);
    const int y1 = std::min(y0 + 1, H - 1);
    const double fx = u - x0, fy = v - y0;
    auto at = [&](int yy, int xx) {
        return f[static_cast<std::size_t>(yy * W + xx)];
    };
    return at(y0, x0) * (1 - fy) * (1 - fx) + at(y0, x1) * (1 - fy) * fx +
           at(y1, x0) * fy * (1 - fx) + at(y1, x1) * fy * fx;
}

// scalar generalized mean
inline double gem_oracle(const std::vector<double>& vals, double p,
                         double eps = 1e-6) {
    double acc = 0.0;
    for (double v : vals) acc += std::pow(std::max(v, eps), p);
    return std::pow(acc / static_cast<double>(vals.size()), 1.0 / p);
}

// double-loop multi-similarity miner
struct MinedOracle {
    std::vector<std::vector<int>> pos, neg;
};
inline MinedOracle ms_mine_oracle(const std::vector<double>& sim, int n,
                                  const std::vector<int>& labels, double eps) {
    MinedOracle out;
    out.pos.resize(static_cast<std::size_t>(n));
    out.neg.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::vector<int> pos_cand, neg_cand;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            (labels[static_cast<std::size_t>(j)] ==
                     labels[static_cast<std::size_t>(i)]
                 ? pos_cand
                 : neg_cand)
                .push_back(j);
        }
        if (pos_cand.empty() || neg_cand.empty()) continue;
        double max_neg = -1e300, min_pos = 1e300;
        for (int k : neg_cand)
            max_neg = std::max(max_neg, sim[static_cast<std::size_t>(i * n + k)]);
        for (int j : pos_cand)
            min_pos = std::min(min_pos, sim[static_cast<std::size_t>(i * n + j)]);
        for (int j : pos_cand)
            if (sim[static_cast<std::size_t>(i * n + j)] < max_neg + eps)
                out.pos[static_cast<std::size_t>(i)].push_back(j);
        for (int k : neg_cand)
            if (sim[static_cast<std::size_t>(i * n + k)] > min_pos - eps)
                out.neg[static_cast<std::size_t>(i)].push_back(k);
    }
    return out;
}

// scalar multi-similarity loss on raw descriptor rows
inline double ms_loss_oracle(const std::vector<std::vector<double>>& desc,
                             const std::vector<int>& labels, double alpha,
                             double beta, double lambda, double eps) {
    const int n = static_cast<int>(desc.size());
    std::vector<double> sim(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t q = 0; q < desc[0].size(); ++q)
                acc += desc[static_cast<std::size_t>(i)][q] *
                       desc[static_cast<std::size_t>(j)][q];
            sim[static_cast<std::size_t>(i * n + j)] = acc;
        }
    const MinedOracle mined = ms_mine_oracle(sim, n, labels, eps);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        double ps = 0.0, ns = 0.0;
        for (int j : mined.pos[static_cast<std::size_t>(i)])
            ps += std::exp(-alpha *
                           (sim[static_cast<std::size_t>(i * n + j)] - lambda));
        for (int k : mined.neg[static_cast<std::size_t>(i)])
            ns += std::exp(beta *
                           (sim[static_cast<std::size_t>(i * n + k)] - lambda));
        total += std::log(1.0 + ps) / alpha + std::log(1.0 + ns) / beta;
    }
    return total / n;
}

// ---- finite-difference property suites (shared with acceptance) ----
// Each returns the max relative error over `reps` random instances.

inline double suite_linear(RngState& rng, int reps) {
    double worst = 0.0;
    for (int r = 0; r < reps; ++r) {
        const index_t m = 1 + static_cast<index_t>(rng.uniform_index(3));
        const index_t in = 1 + static_cast<index_t>(rng.uniform_index(4));
        const index_t out = 1 + static_cast<index_t>(rng.uniform_index(4));
        auto x = rand_tensor({m, in}, rng);
        auto w = rand_tensor({in, out}, rng);
        auto b = rand_tensor({out}, rng);
        auto lw = rand_weights(m * out, rng);
        auto rep = vpr::grad_check(
            {x, w, b},
            [&] { return vpr::dot_const(vpr::linear(x, w, b), lw); });
        worst = std::max(worst, rep.max_rel_err);
    }
    return worst;
}

inline double suite_conv2d(RngState& rng, int reps) {
    double worst = 0.0;
    for (int r = 0; r < reps; ++r) {
        const index_t B = 1 + static_cast<index_t>(rng.uniform_index(2));
        const index_t C = 1 + static_cast<index_t>(rng.uniform_index(2));
        const index_t H = 2 + static_cast<index_t>(rng.uniform_index(3));
        const index_t W = 2 + static_cast<index_t>(rng.uniform_index(3));
        const index_t Co = 1 + static_cast<index_t>(rng.uniform_index(2));
        const index_t k = rng.uniform_index(2) == 0 ? 1 : 3;
        auto x = rand_tensor({B, C, H, W}, rng);
        auto kk = rand_tensor({Co, C, k, k}, rng);
        auto b = rand_tensor({Co}, rng);
        auto lw = rand_weights(B * Co * H * W, rng);
        auto rep = vpr::grad_check(
            {x, kk, b},
            [&] { return vpr::dot_const(vpr::conv2d(x, kk, b), lw); });
        worst = std::max(worst, rep.max_rel_err);
    }
    return worst;
}

inline double suite_layer_norm(RngState& rng, int reps) {
    double worst = 0.0;
    for (int r = 0; r < reps; ++r) {
        const index_t rows = 1 + static_cast<index_t>(rng.uniform_index(3));
        const index_t d = 2 + static_cast<index_t>(rng.uniform_index(5));
        auto x = rand_tensor({rows, d}, rng);
        auto g = rand_tensor({d}, rng, 0.5, 1.5);
        auto b = rand_tensor({d}, rng);
        auto lw = rand_weights(rows * d, rng);
        auto rep = vpr::grad_check(
            {x, g, b},
            [&] { return vpr::dot_const(vpr::layer_norm(x, g, b), lw); });
        worst = std::max(worst, rep.max_rel_err);
    }
    return worst;
}

inline double suite_softmax(RngState& rng, int reps) {
    double worst = 0.0;
    for (int r = 0; r < reps; ++r) {
        const index_t rows = 1 + static_cast<index_t>(rng.uniform_index(3));
        const index_t d = 2 + static_cast<index_t>(rng.uniform_index(5));
        auto x = rand_tensor({rows, d}, rng, -2.0, 2.0);
        auto lw = rand_weights(rows * d, rng);
        auto rep = vpr::grad_check(
            {x}, [&] { return vpr::dot_const(vpr::softmax_lastaxis(x), lw); });
        worst = std::max(worst, rep.max_rel_err);
    }
    return worst;
}

inline double suite_gelu(RngState& rng, int reps) {
    double worst = 0.0;
    for (int r = 0; r < reps; ++r) {
        const index_t n = 1 + static_cast<index_t>(rng.uniform_index(8));
        auto x = rand_tensor({n}, rng, -3.0, 3.0);
        auto lw = rand_weights(n, rng);
        auto rep = vpr::grad_check(
            {x}, [&] { return vpr::dot_const(vpr::gelu(x), lw); });
        worst = std::max(worst, rep.max_rel_err);
    }
    return worst;
}

inline double suite_mhsa(RngState& rng, int reps) {
    double worst = 0.0;
    for (int r = 0; r < reps; ++r) {
        const index_t B = 1 + static_cast<index_t>(rng.uniform_index(2));
        const index_t T = 1 + static_cast<index_t>(rng.uniform_index(3));
        const int heads = rng.uniform_index(2) == 0 ? 1 : 2;
        const index_t d = heads * (2 + static_cast<index_t>(rng.uniform_index(2)));
        auto x = rand_tensor({B, T, d}, rng);
        vpr::AttnParams<double> p{
            rand_tensor({d, d}, rng), rand_tensor({d}, rng),
            rand_tensor({d, d}, rng), rand_tensor({d}, rng),
            rand_tensor({d, d}, rng), rand_tensor({d}, rng),
            rand_tensor({d, d}, rng), rand_tensor({d}, rng)};
        auto lw = rand_weights(B * T * d, rng);
        auto rep = vpr::grad_check(
            {x, p.wq, p.wk, p.wv, p.wo},
            [&] { return vpr::dot_const(vpr::mhsa(x, p, heads), lw); },
            1e-5, 1e-5);
        worst = std::max(worst, rep.max_rel_err);
    }
    return worst;
}

// grid coordinates kept away from pixel-lattice crossings and borders so
// central differences stay on one linear piece
inline Tensor<double> safe_grid(index_t B, index_t Ho, index_t Wo, index_t H,
                                index_t W, RngState& rng) {
    auto g = Tensor<double>::zeros({B, Ho, Wo, 2});
    auto& gd = g.data();
    for (std::size_t i = 0; i < gd.size(); i += 2) {
        const double u =
            (W > 1) ? rng.uniform_index(static_cast<std::uint64_t>(W - 1)) +
                          rng.uniform(0.2, 0.8)
                    : 0.0;
        const double v =
            (H > 1) ? rng.uniform_index(static_cast<std::uint64_t>(H - 1)) +
                          rng.uniform(0.2, 0.8)
                    : 0.0;
        gd[i] = W > 1 ? 2.0 * u / static_cast<double>(W - 1) - 1.0 : 0.0;
        gd[i + 1] = H > 1 ? 2.0 * v / static_cast<double>(H - 1) - 1.0 : 0.0;
    }
    return g;
}

inline double suite_grid_sample(RngState& rng, int reps) {
    double worst = 0.0;
    for (int r = 0; r < reps; ++r) {
        const index_t B = 1 + static_cast<index_t>(rng.uniform_index(2));
        const index_t C = 1 + static_cast<index_t>(rng.uniform_index(2));
        const index_t H = 2 + static_cast<index_t>(rng.uniform_index(3));
        const index_t W = 2 + static_cast<index_t>(rng.uniform_index(3));
        const index_t Ho = 1 + static_cast<index_t>(rng.uniform_index(3));
        const index_t Wo = 1 + static_cast<index_t>(rng.uniform_index(3));
        auto f = rand_tensor({B, C, H, W}, rng);
        auto g = safe_grid(B, Ho, Wo, H, W, rng);
        auto lw = rand_weights(B * C * Ho * Wo, rng);
        auto rep = vpr::grad_check(
            {f, g},
            [&] { return vpr::dot_const(vpr::grid_sample_bilinear(f, g), lw); },
            1e-6, 1e-5);
        worst = std::max(worst, rep.max_rel_err);
    }
    return worst;
}

inline double suite_gem(RngState& rng, int reps) {
    double worst = 0.0;
    for (int r = 0; r < reps; ++r) {
        const index_t B = 1 + static_cast<index_t>(rng.uniform_index(2));
        const index_t C = 1 + static_cast<index_t>(rng.uniform_index(3));
        const index_t H = 1 + static_cast<index_t>(rng.uniform_index(3));
        const index_t W = 1 + static_cast<index_t>(rng.uniform_index(3));
        auto f = rand_tensor({B, C, H, W}, rng, 0.2, 2.0);
        auto p = rand_tensor({1}, rng, 0.7, 4.0);
        auto lw = rand_weights(B * C, rng);
        auto rep = vpr::grad_check(
            {f, p}, [&] { return vpr::dot_const(vpr::gem_pool(f, p), lw); });
        worst = std::max(worst, rep.max_rel_err);
    }
    return worst;
}

inline double suite_l2norm(RngState& rng, int reps) {
    double worst = 0.0;
    for (int r = 0; r < reps; ++r) {
        const index_t rows = 1 + static_cast<index_t>(rng.uniform_index(3));
        const index_t d = 2 + static_cast<index_t>(rng.uniform_index(6));
        auto x = rand_tensor({rows, d}, rng);
        auto lw = rand_weights(rows * d, rng);
        auto rep = vpr::grad_check(
            {x},
            [&] { return vpr::dot_const(vpr::l2_normalize_lastaxis(x), lw); });
        worst = std::max(worst, rep.max_rel_err);
    }
    return worst;
}

inline double suite_ms_loss(RngState& rng, int reps) {
    double worst = 0.0;
    vpr::LossConfig cfg;
    for (int r = 0; r < reps; ++r) {
        const index_t n = 4 + static_cast<index_t>(rng.uniform_index(5));
        const index_t d = 3 + static_cast<index_t>(rng.uniform_index(4));
        auto x = rand_tensor({n, d}, rng, -0.7, 0.7);
        std::vector<int> labels;
        for (index_t i = 0; i < n; ++i)
            labels.push_back(static_cast<int>(rng.uniform_index(3)));
        auto rep = vpr::grad_check(
            {x}, [&] { return vpr::ms_loss(x, labels, cfg); });
        worst = std::max(worst, rep.max_rel_err);
    }
    return worst;
}

}  // namespace vprtest
