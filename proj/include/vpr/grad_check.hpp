#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vpr/ops.hpp"

namespace vpr {

struct GradCheckReport {
    bool pass = false;
    double max_rel_err = 0.0;
    std::string worst;          // "input k, flat index i"
    std::vector<double> per_input_max;
    std::string failure;        // non-empty if the forward pass blew up
};

// Central finite differences against reverse-mode gradients, f64 only.
// `make_loss` rebuilds the graph from the inputs' current values and
// returns a scalar. Relative error uses max(|analytic|, |numeric|, 1) in
// the denominator so near-zero gradients are compared absolutely.
inline GradCheckReport grad_check(std::vector<Tensor<double>> inputs,
                                  const std::function<Tensor<double>()>& make_loss,
                                  double h = 1e-5, double tol = 1e-5) {
    GradCheckReport rep;
    std::vector<std::vector<double>> analytic;
    try {
        for (auto& in : inputs) {
            in.set_requires_grad(true);
            in.zero_grad();
        }
        Tensor<double> loss = make_loss();
        loss.backward();
        for (auto& in : inputs) analytic.push_back(in.grad());
    } catch (const numeric_error& e) {
        rep.failure = e.what();
        return rep;
    }

    rep.per_input_max.assign(inputs.size(), 0.0);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto& data = inputs[k].data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double saved = data[i];
            double fp, fm;
            try {
                data[i] = saved + h;
                fp = make_loss().item();
                data[i] = saved - h;
                fm = make_loss().item();
            } catch (const numeric_error& e) {
                data[i] = saved;
                rep.failure = e.what();
                return rep;
            }
            data[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[k][i];
            const double rel = std::abs(a - numeric) /
                               std::max({std::abs(a), std::abs(numeric), 1.0});
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst = "input " + std::to_string(k) + ", flat index " +
                            std::to_string(i);
            }
            rep.per_input_max[k] = std::max(rep.per_input_max[k], rel);
        }
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

}  // namespace vpr
