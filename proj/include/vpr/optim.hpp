#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vpr/params.hpp"

namespace vpr {

enum class OptimKind { adam, adamw };

struct OptimConfig {
    OptimKind kind = OptimKind::adam;
    double lr = 2.5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;  // adamw only
};

// Bias-corrected Adam / AdamW over a ParamStore. Frozen params are left
// untouched (no moment update, no decay). Missing grads count as zero.
template <typename T>
class Optimizer {
public:
    Optimizer(OptimConfig cfg, const ParamStore<T>& store) : cfg_(cfg) {
        m_.resize(store.count());
        v_.resize(store.count());
        for (std::size_t i = 0; i < store.count(); ++i) {
            const auto n = store.entries()[i].tensor.data().size();
            m_[i].assign(n, 0.0);
            v_[i].assign(n, 0.0);
        }
    }

    std::int64_t step_count() const { return step_; }

    void step(ParamStore<T>& store) {
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (std::size_t pi = 0; pi < store.count(); ++pi) {
            const auto& entry = store.entries()[pi];
            if (store.is_frozen(entry.name)) continue;
            Tensor<T> handle = entry.tensor;  // shared handle, mutable data
            auto& data = handle.data();
            const auto& grad = handle.grad_view();
            const bool has_grad = grad.size() == data.size();
            for (std::size_t i = 0; i < data.size(); ++i) {
                const double g = has_grad ? static_cast<double>(grad[i]) : 0.0;
                m_[pi][i] = cfg_.beta1 * m_[pi][i] + (1.0 - cfg_.beta1) * g;
                v_[pi][i] = cfg_.beta2 * v_[pi][i] + (1.0 - cfg_.beta2) * g * g;
                const double mhat = m_[pi][i] / bc1;
                const double vhat = v_[pi][i] / bc2;
                double theta = static_cast<double>(data[i]);
                if (cfg_.kind == OptimKind::adamw)
                    theta -= cfg_.lr * cfg_.weight_decay * theta;
                theta -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
                data[i] = static_cast<T>(theta);
            }
        }
    }

private:
    OptimConfig cfg_;
    std::int64_t step_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace vpr
