#pragma once

#include <array>
#include <string>
#include <vector>

#include "vpr/fusion.hpp"

namespace vpr {

// Multi-scale deformable region aggregation over the fused feature map.
//
// Coordinate conventions, used consistently below:
//  - ROI bounds live in continuous map edge-space: x in [0, map_w],
//    y in [0, map_h]; pixel (i,j) occupies the unit cell with center
//    (j + 0.5, i + 0.5).
//  - Sampling grids are normalized align-corners coordinates in [-1,1]:
//    x_norm = 2*(x_map - 0.5)/(map_w - 1) - 1, so corner pixel centers map
//    to exactly -1 / +1. Out-of-range samples clamp to the border.

enum class GridMode { deformable, fixed };

struct RoiSpec {
    int level = 0;  // 0 global, 1 medium, 2 small
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    int grid_h = 0, grid_w = 0;

    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }
    double w() const { return x2 - x1; }
    double h() const { return y2 - y1; }
    bool contains(double x, double y) const {
        return x >= x1 && x <= x2 && y >= y1 && y <= y2;
    }
};

struct AggregatorConfig {
    int gen_hidden = 64;      // generator 1x1 conv width
    int grid_global = 8;      // sampling grid side per level
    int grid_medium = 4;
    int grid_small = 3;
    double gem_eps = 1e-6;
    double init_p = 3.0;

    int grid_side(int level) const {
        return level == 0 ? grid_global : (level == 1 ? grid_medium : grid_small);
    }
};

// Canonical region order: global, 4 medium row-major, 9 small row-major.
inline std::vector<RoiSpec> build_pyramid_rois(index_t map_h, index_t map_w,
                                               const AggregatorConfig& cfg) {
    if (map_h < 3 || map_w < 3)
        throw config_error("build_pyramid_rois: map " + std::to_string(map_h) +
                           "x" + std::to_string(map_w) +
                           " is smaller than 3x3");
    std::vector<RoiSpec> rois;
    const double W = static_cast<double>(map_w);
    const double H = static_cast<double>(map_h);
    rois.push_back({0, 0.0, 0.0, W, H, cfg.grid_global, cfg.grid_global});
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
            rois.push_back({1, c * W / 2.0, r * H / 2.0, (c + 1) * W / 2.0,
                            (r + 1) * H / 2.0, cfg.grid_medium,
                            cfg.grid_medium});
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            rois.push_back({2, c * W / 3.0, r * H / 3.0, (c + 1) * W / 3.0,
                            (r + 1) * H / 3.0, cfg.grid_small, cfg.grid_small});
    return rois;
}

namespace agg_detail {

inline double rel_coord(int j, int n) {
    // n evenly spaced points in [-1,1], endpoints included
    return n > 1 ? -1.0 + 2.0 * j / static_cast<double>(n - 1) : 0.0;
}

inline double to_norm(double map_coord, index_t extent) {
    if (extent <= 1) return 0.0;
    return 2.0 * (map_coord - 0.5) / static_cast<double>(extent - 1) - 1.0;
}

// Constant normalized sampling grid over the ROI's base positions.
template <typename T>
Tensor<T> base_sample_grid(const RoiSpec& roi, index_t map_h, index_t map_w,
                           index_t B) {
    const int gh = roi.grid_h, gw = roi.grid_w;
    std::vector<T> g(static_cast<std::size_t>(B) * gh * gw * 2);
    std::size_t k = 0;
    for (index_t b = 0; b < B; ++b)
        for (int i = 0; i < gh; ++i)
            for (int j = 0; j < gw; ++j) {
                const double xm = roi.cx() + rel_coord(j, gw) * roi.w() / 2.0;
                const double ym = roi.cy() + rel_coord(i, gh) * roi.h() / 2.0;
                g[k++] = static_cast<T>(to_norm(xm, map_w));
                g[k++] = static_cast<T>(to_norm(ym, map_h));
            }
    return Tensor<T>::from_data({B, gh, gw, 2}, std::move(g));
}

template <typename T>
Tensor<T> const_like_grid(index_t B, int gh, int gw,
                          const std::function<double(int, int, int)>& f) {
    // channel-last [B,gh,gw,1] constant built from (i,j,channel) values
    std::vector<T> v(static_cast<std::size_t>(B) * gh * gw);
    std::size_t k = 0;
    for (index_t b = 0; b < B; ++b)
        for (int i = 0; i < gh; ++i)
            for (int j = 0; j < gw; ++j) v[k++] = static_cast<T>(f(i, j, 0));
    return Tensor<T>::from_data({B, gh, gw, 1}, std::move(v));
}

}  // namespace agg_detail

template <typename T>
void init_aggregator(ParamStore<T>& store, const std::string& prefix,
                     index_t feat_dim, const AggregatorConfig& cfg,
                     RngState& rng, bool with_generator) {
    if (with_generator) {
        const index_t c = cfg.gen_hidden;
        store.add_randn(prefix + ".gen.conv1.w", {c, 2 * feat_dim, 1, 1}, rng,
                        0.02);
        store.add_zeros(prefix + ".gen.conv1.b", {c});
        // zero init makes the generator an exact identity at start
        store.add_zeros(prefix + ".gen.conv2.w", {4, c, 3, 3});
        store.add_zeros(prefix + ".gen.conv2.b", {4});
    }
    store.add_randn(prefix + ".fuse.medium.w", {feat_dim, feat_dim}, rng, 0.02);
    store.add_zeros(prefix + ".fuse.medium.b", {feat_dim});
    store.add_randn(prefix + ".fuse.global.w", {feat_dim, feat_dim}, rng, 0.02);
    store.add_zeros(prefix + ".fuse.global.b", {feat_dim});
    const char* levels[3] = {"global", "medium", "small"};
    for (int lv = 0; lv < 3; ++lv) {
        const index_t side = cfg.grid_side(lv);
        store.add_randn(prefix + ".pe." + levels[lv] + ".w",
                        {4 * side * side, feat_dim}, rng, 0.02);
        store.add_zeros(prefix + ".pe." + levels[lv] + ".b", {feat_dim});
    }
    for (int lv = 0; lv < 3; ++lv)
        store.add_filled(prefix + ".gem.p." + std::string(levels[lv]), {1},
                         static_cast<T>(cfg.init_p));
}

// Class token spatially broadcast and concatenated on the channel axis.
template <typename T>
Tensor<T> fuse_class_token(const Tensor<T>& map, const Tensor<T>& cls) {
    if (map.ndim() != 4 || cls.ndim() != 2 || map.dim(0) != cls.dim(0) ||
        map.dim(1) != cls.dim(1)) {
        throw dimension_error("fuse_class_token: map " + shape_str(map.shape()) +
                              " vs class " + shape_str(cls.shape()));
    }
    return concat<T>({map, broadcast_map(cls, map.dim(2), map.dim(3))}, 1);
}

// Two-layer CNN head predicting per-location offset/scale fields,
// channels ordered (dx, dy, sw_raw, sh_raw).
template <typename T>
Tensor<T> deformable_generator(const Tensor<T>& fused, const ParamStore<T>& store,
                               const std::string& prefix) {
    Tensor<T> h = gelu(conv2d(fused, store.at(prefix + ".gen.conv1.w"),
                              store.at(prefix + ".gen.conv1.b")));
    return conv2d(h, store.at(prefix + ".gen.conv2.w"),
                  store.at(prefix + ".gen.conv2.b"));
}

// Bilinear-samples the raw field at the ROI's base grid, then applies the
// bounding activations: offsets 0.5*tanh(raw) in [-0.5, 0.5], scales
// 1 + 0.5*tanh(raw) in [0.5, 1.5]. Zero raw output is exactly identity.
template <typename T>
Tensor<T> sample_roi_params(const Tensor<T>& O, const RoiSpec& roi,
                            index_t map_h, index_t map_w) {
    const index_t B = O.dim(0);
    Tensor<T> grid = agg_detail::base_sample_grid<T>(roi, map_h, map_w, B);
    Tensor<T> raw = permute(grid_sample_bilinear(O, grid), {0, 2, 3, 1});
    Tensor<T> dx = affine(tanh_op(slice(raw, 3, 0, 1)), 0.5, 0.0);
    Tensor<T> dy = affine(tanh_op(slice(raw, 3, 1, 1)), 0.5, 0.0);
    Tensor<T> sw = affine(tanh_op(slice(raw, 3, 2, 1)), 0.5, 1.0);
    Tensor<T> sh = affine(tanh_op(slice(raw, 3, 3, 1)), 0.5, 1.0);
    return concat<T>({dx, dy, sw, sh}, 3);
}

// Identity transformation parameters (dx=dy=0, sw=sh=1).
template <typename T>
Tensor<T> identity_roi_params(const RoiSpec& roi, index_t B) {
    const int gh = roi.grid_h, gw = roi.grid_w;
    std::vector<T> v(static_cast<std::size_t>(B) * gh * gw * 4);
    std::size_t k = 0;
    for (index_t q = 0; q < B * gh * gw; ++q) {
        v[k++] = T(0);
        v[k++] = T(0);
        v[k++] = T(1);
        v[k++] = T(1);
    }
    return Tensor<T>::from_data({B, gh, gw, 4}, std::move(v));
}

// Deforms the ROI's base grid in map edge-space:
//   x = cx + (x_rel * sw + dx) * w/2,  y = cy + (y_rel * sh + dy) * h/2.
template <typename T>
Tensor<T> deform_grid_map(const Tensor<T>& roi_params, const RoiSpec& roi) {
    const index_t B = roi_params.dim(0);
    const int gh = roi.grid_h, gw = roi.grid_w;
    Tensor<T> dx = slice(roi_params, 3, 0, 1);
    Tensor<T> dy = slice(roi_params, 3, 1, 1);
    Tensor<T> sw = slice(roi_params, 3, 2, 1);
    Tensor<T> sh = slice(roi_params, 3, 3, 1);
    Tensor<T> xrel = agg_detail::const_like_grid<T>(
        B, gh, gw, [&](int, int j, int) { return agg_detail::rel_coord(j, gw); });
    Tensor<T> yrel = agg_detail::const_like_grid<T>(
        B, gh, gw, [&](int i, int, int) { return agg_detail::rel_coord(i, gh); });
    Tensor<T> x = affine(add(mul(xrel, sw), dx), roi.w() / 2.0, roi.cx());
    Tensor<T> y = affine(add(mul(yrel, sh), dy), roi.h() / 2.0, roi.cy());
    return concat<T>({x, y}, 3);
}

// Map edge-space -> normalized align-corners sampling space.
template <typename T>
Tensor<T> map_to_sample_grid(const Tensor<T>& map_grid, index_t map_h,
                             index_t map_w) {
    Tensor<T> x = slice(map_grid, 3, 0, 1);
    Tensor<T> y = slice(map_grid, 3, 1, 1);
    auto coeffs = [](index_t extent) {
        if (extent <= 1) return std::pair<double, double>{0.0, 0.0};
        const double a = 2.0 / static_cast<double>(extent - 1);
        return std::pair<double, double>{a, -0.5 * a - 1.0};
    };
    auto [ax, bx] = coeffs(map_w);
    auto [ay, by] = coeffs(map_h);
    return concat<T>({affine(x, ax, bx), affine(y, ay, by)}, 3);
}

template <typename T>
Tensor<T> deform_grid(const Tensor<T>& roi_params, const RoiSpec& roi,
                      index_t map_h, index_t map_w) {
    return map_to_sample_grid(deform_grid_map(roi_params, roi), map_h, map_w);
}

// Grid-sample the feature map at the deformed grid, then GeM over the
// sampled window.
template <typename T>
Tensor<T> pool_region(const Tensor<T>& map, const Tensor<T>& sample_grid,
                      const Tensor<T>& p, double eps) {
    return gem_pool(grid_sample_bilinear(map, sample_grid), p, eps);
}

// Assigns each small region to one medium region: containment of the
// deformed small center in the medium's ORIGINAL bounds; ties broken by
// distance to the original medium center, then by medium index; centers
// contained nowhere go to the nearest original center.
inline std::array<int, 9> assign_smalls(
    const std::vector<RoiSpec>& rois,
    const std::array<std::array<double, 2>, 9>& small_centers) {
    std::array<int, 9> out{};
    for (int s = 0; s < 9; ++s) {
        const double x = small_centers[static_cast<std::size_t>(s)][0];
        const double y = small_centers[static_cast<std::size_t>(s)][1];
        int best = -1;
        double best_d = 0.0;
        bool any_contain = false;
        for (int m = 0; m < 4; ++m) {
            const RoiSpec& roi = rois[static_cast<std::size_t>(1 + m)];
            const bool in = roi.contains(x, y);
            const double dx = x - roi.cx(), dy = y - roi.cy();
            const double d = dx * dx + dy * dy;
            if (in && !any_contain) {
                // first contained candidate resets the pool
                any_contain = true;
                best = m;
                best_d = d;
                continue;
            }
            if (in == any_contain && (best < 0 || d < best_d)) {
                best = m;
                best_d = d;
            }
        }
        out[static_cast<std::size_t>(s)] = best;
    }
    return out;
}

template <typename T>
struct RegionOutputs {
    std::vector<Tensor<T>> descriptors;  // 14 x [B,D], after fusion + PE
    std::vector<Tensor<T>> pooled;       // 14 x [B,D], before fusion/PE
    std::vector<Tensor<T>> roi_params;   // 14 x [B,H',W',4], activated
    std::vector<RoiSpec> rois;
    // mean of the deformed grid per region per batch item (map units)
    std::vector<std::vector<std::array<double, 2>>> centers;
    std::vector<std::array<int, 9>> assignment;  // per batch item
};

// Full aggregation chain: class-token fusion -> deformation fields ->
// per-ROI sampling + GeM -> small-to-medium-to-global fusion -> position
// embedding from the flattened transformation parameters. `fixed` mode
// uses identity deformations and never touches generator parameters.
template <typename T>
RegionOutputs<T> aggregate(const AlignedFeatures<T>& feats,
                           const ParamStore<T>& store,
                           const std::string& prefix,
                           const AggregatorConfig& cfg, GridMode mode) {
    const index_t B = feats.map.dim(0);
    const index_t D = feats.map.dim(1);
    const index_t mh = feats.map_h, mw = feats.map_w;

    RegionOutputs<T> out;
    out.rois = build_pyramid_rois(mh, mw, cfg);

    Tensor<T> fields;
    if (mode == GridMode::deformable) {
        Tensor<T> fused = fuse_class_token(feats.map, feats.cls);
        fields = deformable_generator(fused, store, prefix);
    }

    const char* levels[3] = {"global", "medium", "small"};
    std::vector<Tensor<T>> map_grids;
    for (const RoiSpec& roi : out.rois) {
        Tensor<T> params = (mode == GridMode::deformable)
                               ? sample_roi_params(fields, roi, mh, mw)
                               : identity_roi_params<T>(roi, B);
        Tensor<T> map_grid = deform_grid_map(params, roi);
        Tensor<T> sample_grid = map_to_sample_grid(map_grid, mh, mw);
        Tensor<T> p = store.at(prefix + ".gem.p." +
                               std::string(levels[roi.level]));
        out.pooled.push_back(pool_region(feats.map, sample_grid, p, cfg.gem_eps));
        out.roi_params.push_back(params);
        map_grids.push_back(map_grid);
    }

    // deformed centers (values only; the assignment is a discrete choice)
    out.centers.resize(14);
    for (int ri = 0; ri < 14; ++ri) {
        const auto& g = map_grids[static_cast<std::size_t>(ri)];
        const index_t npts = g.dim(1) * g.dim(2);
        out.centers[static_cast<std::size_t>(ri)].resize(
            static_cast<std::size_t>(B));
        for (index_t b = 0; b < B; ++b) {
            double sx = 0.0, sy = 0.0;
            const auto& gd = g.data();
            const std::size_t base = static_cast<std::size_t>(b * npts * 2);
            for (index_t q = 0; q < npts; ++q) {
                sx += static_cast<double>(gd[base + static_cast<std::size_t>(2 * q)]);
                sy += static_cast<double>(gd[base + static_cast<std::size_t>(2 * q + 1)]);
            }
            out.centers[static_cast<std::size_t>(ri)][static_cast<std::size_t>(b)] =
                {sx / static_cast<double>(npts), sy / static_cast<double>(npts)};
        }
    }

    out.assignment.resize(static_cast<std::size_t>(B));
    for (index_t b = 0; b < B; ++b) {
        std::array<std::array<double, 2>, 9> sc;
        for (int s = 0; s < 9; ++s)
            sc[static_cast<std::size_t>(s)] =
                out.centers[static_cast<std::size_t>(5 + s)]
                           [static_cast<std::size_t>(b)];
        out.assignment[static_cast<std::size_t>(b)] = assign_smalls(out.rois, sc);
    }

    // down-top fusion: small -> medium, then medium -> global
    std::vector<Tensor<T>> small3d;
    for (int s = 0; s < 9; ++s)
        small3d.push_back(reshape(out.pooled[static_cast<std::size_t>(5 + s)],
                                  {B, 1, D}));
    Tensor<T> smalls = concat<T>(small3d, 1);  // [B,9,D]

    std::vector<Tensor<T>> fused_desc(14);
    for (int m = 0; m < 4; ++m) {
        std::vector<double> wts(static_cast<std::size_t>(B * 9), 0.0);
        std::vector<double> gate(static_cast<std::size_t>(B), 0.0);
        for (index_t b = 0; b < B; ++b) {
            int n = 0;
            for (int s = 0; s < 9; ++s)
                if (out.assignment[static_cast<std::size_t>(b)]
                                  [static_cast<std::size_t>(s)] == m)
                    ++n;
            if (n == 0) continue;  // no neighbors, no update
            gate[static_cast<std::size_t>(b)] = 1.0;
            for (int s = 0; s < 9; ++s)
                if (out.assignment[static_cast<std::size_t>(b)]
                                  [static_cast<std::size_t>(s)] == m)
                    wts[static_cast<std::size_t>(b * 9 + s)] = 1.0 / n;
        }
        Tensor<T> mean = weighted_sum_axis1(smalls, wts);
        Tensor<T> upd = scale_rows(linear(mean, store.at(prefix + ".fuse.medium.w"),
                                          store.at(prefix + ".fuse.medium.b")),
                                   gate);
        fused_desc[static_cast<std::size_t>(1 + m)] =
            add(out.pooled[static_cast<std::size_t>(1 + m)], upd);
    }
    std::vector<Tensor<T>> med3d;
    for (int m = 0; m < 4; ++m)
        med3d.push_back(reshape(fused_desc[static_cast<std::size_t>(1 + m)],
                                {B, 1, D}));
    Tensor<T> meds = concat<T>(med3d, 1);  // [B,4,D]
    std::vector<double> quarter(static_cast<std::size_t>(B * 4), 0.25);
    Tensor<T> gmean = weighted_sum_axis1(meds, quarter);
    fused_desc[0] = add(out.pooled[0],
                        linear(gmean, store.at(prefix + ".fuse.global.w"),
                               store.at(prefix + ".fuse.global.b")));
    for (int s = 0; s < 9; ++s)
        fused_desc[static_cast<std::size_t>(5 + s)] =
            out.pooled[static_cast<std::size_t>(5 + s)];

    // deformation-aware position embedding
    out.descriptors.resize(14);
    for (int ri = 0; ri < 14; ++ri) {
        const RoiSpec& roi = out.rois[static_cast<std::size_t>(ri)];
        Tensor<T> flat = reshape(out.roi_params[static_cast<std::size_t>(ri)],
                                 {B, static_cast<index_t>(roi.grid_h) *
                                         roi.grid_w * 4});
        Tensor<T> pe = linear(flat,
                              store.at(prefix + ".pe." +
                                       std::string(levels[roi.level]) + ".w"),
                              store.at(prefix + ".pe." +
                                       std::string(levels[roi.level]) + ".b"));
        out.descriptors[static_cast<std::size_t>(ri)] =
            add(fused_desc[static_cast<std::size_t>(ri)], pe);
    }
    return out;
}

}  // namespace vpr
