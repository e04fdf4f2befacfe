#pragma once

#include <string>
#include <vector>

#include "vpr/ops.hpp"

namespace vpr {

struct LossConfig {
    double alpha = 1.0;
    double beta = 50.0;
    double lambda = 0.5;
    double mining_eps = 0.1;

    void validate() const {
        if (alpha <= 0 || beta <= 0)
            throw config_error("loss: alpha and beta must be positive");
        if (lambda <= 0 || lambda >= 1)
            throw config_error("loss: lambda must lie in (0,1)");
    }
};

struct MinedSets {
    std::vector<std::vector<int>> pos;  // per anchor
    std::vector<std::vector<int>> neg;
};

// Multi-similarity pair mining on an N x N similarity matrix.
// For anchor i: keep positive j if s_ij < max over negatives + eps,
// keep negative k if s_ik > min over positives - eps. The diagonal is
// excluded; anchors without positive candidates yield empty sets.
inline MinedSets ms_mine(const std::vector<double>& sim, int n,
                         const std::vector<int>& labels, double eps) {
    MinedSets out;
    out.pos.resize(static_cast<std::size_t>(n));
    out.neg.resize(static_cast<std::size_t>(n));
    auto s = [&](int i, int j) {
        return sim[static_cast<std::size_t>(i * n + j)];
    };
    for (int i = 0; i < n; ++i) {
        double max_neg = 0.0, min_pos = 0.0;
        bool has_pos = false, has_neg = false;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            if (labels[static_cast<std::size_t>(j)] ==
                labels[static_cast<std::size_t>(i)]) {
                if (!has_pos || s(i, j) < min_pos) min_pos = s(i, j);
                has_pos = true;
            } else {
                if (!has_neg || s(i, j) > max_neg) max_neg = s(i, j);
                has_neg = true;
            }
        }
        if (!has_pos || !has_neg) continue;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            if (labels[static_cast<std::size_t>(j)] ==
                labels[static_cast<std::size_t>(i)]) {
                if (s(i, j) < max_neg + eps)
                    out.pos[static_cast<std::size_t>(i)].push_back(j);
            } else {
                if (s(i, j) > min_pos - eps)
                    out.neg[static_cast<std::size_t>(i)].push_back(j);
            }
        }
    }
    return out;
}

// Multi-similarity loss over mined pairs of cosine similarities
// (descriptors are expected L2-normalized so dot products are cosines):
//   L = 1/N sum_i [ 1/a log(1 + sum_{j in P_i} e^{-a (s_ij - l)})
//                 + 1/b log(1 + sum_{k in N_i} e^{ b (s_ik - l)}) ].
// Mining is a discrete selection; gradients flow through the kept
// similarities into the descriptors.
template <typename T>
Tensor<T> ms_loss(const Tensor<T>& desc, const std::vector<int>& labels,
                  const LossConfig& cfg) {
    cfg.validate();
    if (desc.ndim() != 2)
        throw dimension_error("ms_loss: expected [N,d], got " +
                              shape_str(desc.shape()));
    const int n = static_cast<int>(desc.dim(0));
    const index_t d = desc.dim(1);
    if (static_cast<int>(labels.size()) != n)
        throw dimension_error("ms_loss: label count mismatch");

    const auto& xd = desc.data();
    std::vector<double> sim(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (index_t q = 0; q < d; ++q)
                acc += static_cast<double>(xd[detail::uz(i * d + q)]) *
                       static_cast<double>(xd[detail::uz(j * d + q)]);
            sim[static_cast<std::size_t>(i * n + j)] = acc;
        }
    MinedSets mined = ms_mine(sim, n, labels, cfg.mining_eps);

    double loss = 0.0;
    // per-pair gradient coefficients dL/ds_ij
    std::vector<double> coeff(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        double pos_sum = 0.0, neg_sum = 0.0;
        for (int j : mined.pos[static_cast<std::size_t>(i)])
            pos_sum += std::exp(-cfg.alpha *
                                (sim[static_cast<std::size_t>(i * n + j)] -
                                 cfg.lambda));
        for (int k : mined.neg[static_cast<std::size_t>(i)])
            neg_sum += std::exp(cfg.beta *
                                (sim[static_cast<std::size_t>(i * n + k)] -
                                 cfg.lambda));
        loss += std::log1p(pos_sum) / cfg.alpha + std::log1p(neg_sum) / cfg.beta;
        for (int j : mined.pos[static_cast<std::size_t>(i)])
            coeff[static_cast<std::size_t>(i * n + j)] +=
                -std::exp(-cfg.alpha *
                          (sim[static_cast<std::size_t>(i * n + j)] -
                           cfg.lambda)) /
                (static_cast<double>(n) * (1.0 + pos_sum));
        for (int k : mined.neg[static_cast<std::size_t>(i)])
            coeff[static_cast<std::size_t>(i * n + k)] +=
                std::exp(cfg.beta * (sim[static_cast<std::size_t>(i * n + k)] -
                                     cfg.lambda)) /
                (static_cast<double>(n) * (1.0 + neg_sum));
    }
    loss /= static_cast<double>(n);

    std::vector<T> y{static_cast<T>(loss)};
    auto node = detail::make_result<T>({1}, std::move(y), {desc.node()},
                                       "ms_loss");
    auto *xn = desc.raw(), *on = node.get();
    node->backward = [xn, on, coeff, n, d] {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const double g = static_cast<double>(on->grad[0]);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double c = coeff[static_cast<std::size_t>(i * n + j)];
                if (c == 0.0) continue;
                for (index_t q = 0; q < d; ++q) {
                    xn->grad[detail::uz(i * d + q)] += static_cast<T>(
                        g * c * static_cast<double>(xn->value[detail::uz(j * d + q)]));
                    xn->grad[detail::uz(j * d + q)] += static_cast<T>(
                        g * c * static_cast<double>(xn->value[detail::uz(i * d + q)]));
                }
            }
    };
    return Tensor<T>(std::move(node));
}

// Token-level distillation objective: mean squared difference. The
// teacher side is a constant, so gradient flows to the student only.
template <typename T>
Tensor<T> mse_distill_loss(const Tensor<T>& student, const Tensor<T>& teacher) {
    return mse_loss(student, teacher);
}

}  // namespace vpr
