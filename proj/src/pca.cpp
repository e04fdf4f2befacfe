#include "vpr/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vpr/serialize.hpp"

namespace vpr {

void jacobi_eigh(std::vector<double> a, int n, std::vector<double>& eigvals,
                 std::vector<double>& eigvecs) {
    auto at = [&](int i, int j) -> double& {
        return a[static_cast<std::size_t>(i * n + j)];
    };
    eigvecs.assign(static_cast<std::size_t>(n) * n, 0.0);
    auto vt = [&](int i, int j) -> double& {
        return eigvecs[static_cast<std::size_t>(i * n + j)];
    };
    for (int i = 0; i < n; ++i) vt(i, i) = 1.0;

    const int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
        if (off < 1e-24) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) +
                                  std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = vt(k, p), vkq = vt(k, q);
                    vt(k, p) = c * vkp - s * vkq;
                    vt(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    eigvals.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) eigvals[static_cast<std::size_t>(i)] = at(i, i);
}

PcaModel pca_fit(const std::vector<std::vector<float>>& descriptors,
                 int out_dim, bool whiten) {
    const int N = static_cast<int>(descriptors.size());
    if (N < 2) throw config_error("pca_fit: need at least 2 samples");
    const int d = static_cast<int>(descriptors[0].size());
    if (out_dim <= 0 || out_dim > std::min(N - 1, d))
        throw config_error("pca_fit: out_dim " + std::to_string(out_dim) +
                           " exceeds min(N-1, d) = " +
                           std::to_string(std::min(N - 1, d)));

    PcaModel model;
    model.in_dim = d;
    model.out_dim = out_dim;
    model.whiten = whiten;
    model.mean.assign(static_cast<std::size_t>(d), 0.0);
    for (const auto& row : descriptors) {
        if (static_cast<int>(row.size()) != d)
            throw dimension_error("pca_fit: inconsistent descriptor widths");
        for (int j = 0; j < d; ++j)
            model.mean[static_cast<std::size_t>(j)] +=
                static_cast<double>(row[static_cast<std::size_t>(j)]);
    }
    for (auto& m : model.mean) m /= N;

    // centered data X (N x d)
    std::vector<double> X(static_cast<std::size_t>(N) * d);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < d; ++j)
            X[static_cast<std::size_t>(i * d + j)] =
                static_cast<double>(descriptors[static_cast<std::size_t>(i)]
                                               [static_cast<std::size_t>(j)]) -
                model.mean[static_cast<std::size_t>(j)];

    std::vector<double> eigvals, eigvecs;
    std::vector<std::vector<double>> comps;  // candidate components [*, d]
    if (d <= N) {
        // covariance path: C = X^T X / (N-1), d x d
        std::vector<double> C(static_cast<std::size_t>(d) * d, 0.0);
        for (int i = 0; i < N; ++i)
            for (int a = 0; a < d; ++a) {
                const double xa = X[static_cast<std::size_t>(i * d + a)];
                if (xa == 0.0) continue;
                for (int b = 0; b < d; ++b)
                    C[static_cast<std::size_t>(a * d + b)] +=
                        xa * X[static_cast<std::size_t>(i * d + b)];
            }
        for (auto& c : C) c /= (N - 1);
        jacobi_eigh(std::move(C), d, eigvals, eigvecs);
        comps.resize(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k) {
            comps[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(d));
            for (int j = 0; j < d; ++j)
                comps[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] =
                    eigvecs[static_cast<std::size_t>(j * d + k)];
        }
    } else {
        // Gram path: G = X X^T / (N-1); component = normalize(X^T u)
        std::vector<double> G(static_cast<std::size_t>(N) * N, 0.0);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                double acc = 0.0;
                for (int q = 0; q < d; ++q)
                    acc += X[static_cast<std::size_t>(i * d + q)] *
                           X[static_cast<std::size_t>(j * d + q)];
                G[static_cast<std::size_t>(i * N + j)] = acc / (N - 1);
            }
        jacobi_eigh(std::move(G), N, eigvals, eigvecs);
        comps.resize(static_cast<std::size_t>(N));
        for (int k = 0; k < N; ++k) {
            std::vector<double> v(static_cast<std::size_t>(d), 0.0);
            for (int i = 0; i < N; ++i) {
                const double u = eigvecs[static_cast<std::size_t>(i * N + k)];
                if (u == 0.0) continue;
                for (int q = 0; q < d; ++q)
                    v[static_cast<std::size_t>(q)] +=
                        u * X[static_cast<std::size_t>(i * d + q)];
            }
            double nrm = std::sqrt(std::inner_product(v.begin(), v.end(),
                                                      v.begin(), 0.0));
            if (nrm > 1e-12)
                for (auto& q : v) q /= nrm;
            comps[static_cast<std::size_t>(k)] = std::move(v);
        }
    }

    // sort by variance descending, ties by original index
    std::vector<int> order(eigvals.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return eigvals[static_cast<std::size_t>(a)] >
               eigvals[static_cast<std::size_t>(b)];
    });

    model.components.assign(static_cast<std::size_t>(out_dim) * d, 0.0);
    model.variances.assign(static_cast<std::size_t>(out_dim), 0.0);
    for (int k = 0; k < out_dim; ++k) {
        const int src = order[static_cast<std::size_t>(k)];
        auto& v = comps[static_cast<std::size_t>(src)];
        // sign fix: largest-magnitude entry positive (first on ties)
        int arg = 0;
        for (int j = 1; j < d; ++j)
            if (std::abs(v[static_cast<std::size_t>(j)]) >
                std::abs(v[static_cast<std::size_t>(arg)]))
                arg = j;
        const double flip = v[static_cast<std::size_t>(arg)] < 0 ? -1.0 : 1.0;
        for (int j = 0; j < d; ++j)
            model.components[static_cast<std::size_t>(k * d + j)] =
                flip * v[static_cast<std::size_t>(j)];
        model.variances[static_cast<std::size_t>(k)] =
            std::max(eigvals[static_cast<std::size_t>(src)], 0.0);
    }
    return model;
}

std::vector<float> pca_apply(const PcaModel& model, const std::vector<float>& x) {
    if (static_cast<int>(x.size()) != model.in_dim)
        throw dimension_error("pca_apply: descriptor width " +
                              std::to_string(x.size()) + " does not match model " +
                              std::to_string(model.in_dim));
    const int d = model.in_dim, m = model.out_dim;
    std::vector<double> centered(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j)
        centered[static_cast<std::size_t>(j)] =
            static_cast<double>(x[static_cast<std::size_t>(j)]) -
            model.mean[static_cast<std::size_t>(j)];
    std::vector<double> y(static_cast<std::size_t>(m), 0.0);
    for (int k = 0; k < m; ++k) {
        double acc = 0.0;
        for (int j = 0; j < d; ++j)
            acc += model.components[static_cast<std::size_t>(k * d + j)] *
                   centered[static_cast<std::size_t>(j)];
        if (model.whiten)
            acc /= std::sqrt(model.variances[static_cast<std::size_t>(k)] + 1e-12);
        y[static_cast<std::size_t>(k)] = acc;
    }
    double nrm = std::sqrt(std::inner_product(y.begin(), y.end(), y.begin(), 0.0));
    std::vector<float> out(static_cast<std::size_t>(m));
    const double denom = nrm > 1e-12 ? nrm : 1.0;
    for (int k = 0; k < m; ++k)
        out[static_cast<std::size_t>(k)] =
            static_cast<float>(y[static_cast<std::size_t>(k)] / denom);
    return out;
}

void save_pca(const std::string& path, const PcaModel& model) {
    CheckpointEntries entries;
    auto blob = [](Shape shape, std::vector<double> v) {
        TensorBlob b;
        b.shape = std::move(shape);
        b.is_f64 = true;
        b.f64 = std::move(v);
        return b;
    };
    entries.emplace_back("mean", blob({model.in_dim}, model.mean));
    entries.emplace_back("components",
                         blob({model.out_dim, model.in_dim}, model.components));
    entries.emplace_back("variances", blob({model.out_dim}, model.variances));
    entries.emplace_back("whiten",
                         blob({1}, {model.whiten ? 1.0 : 0.0}));
    write_checkpoint(path, entries);
}

PcaModel load_pca(const std::string& path) {
    const auto entries = read_checkpoint(path);
    PcaModel model;
    bool have_mean = false, have_comp = false, have_var = false;
    for (const auto& [name, b] : entries) {
        if (!b.is_f64)
            throw data_error(path + ": entry '" + name + "' must be f64");
        if (name == "mean") {
            model.mean = b.f64;
            model.in_dim = static_cast<int>(b.shape[0]);
            have_mean = true;
        } else if (name == "components") {
            model.components = b.f64;
            model.out_dim = static_cast<int>(b.shape[0]);
            have_comp = true;
        } else if (name == "variances") {
            model.variances = b.f64;
            have_var = true;
        } else if (name == "whiten") {
            model.whiten = b.f64[0] != 0.0;
        } else {
            throw data_error(path + ": unexpected entry '" + name + "'");
        }
    }
    if (!have_mean || !have_comp || !have_var)
        throw data_error(path + ": incomplete PCA model");
    return model;
}

}  // namespace vpr
