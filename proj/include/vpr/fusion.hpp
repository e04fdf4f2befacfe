#pragma once

#include <cmath>
#include <string>

#include "vpr/backbone.hpp"

namespace vpr {

// Student tokens projected into the teacher's feature width, split into a
// class vector and a row-major spatial map for aggregation.
template <typename T>
struct AlignedFeatures {
    Tensor<T> tokens;  // [B, 1+P, D]
    Tensor<T> cls;     // [B, D]
    Tensor<T> map;     // [B, D, h, w], map[b,:,r,c] == token 1 + r*w + c
    index_t map_h = 0;
    index_t map_w = 0;
};

template <typename T>
void init_fusion(ParamStore<T>& store, const std::string& prefix,
                 index_t student_dim, index_t teacher_dim, RngState& rng) {
    store.add_randn(prefix + ".w", {4 * student_dim, teacher_dim}, rng, 0.02);
    store.add_zeros(prefix + ".b", {teacher_dim});
}

// Concatenates the four stage outputs shallow-to-deep along the feature
// axis and projects them to the teacher width with one linear map.
template <typename T>
AlignedFeatures<T> fuse_stages(const StageOutputs<T>& stages,
                               const ParamStore<T>& store,
                               const std::string& prefix) {
    const Shape& s0 = stages[0].shape();
    for (const auto& s : stages) {
        if (s.shape() != s0)
            throw dimension_error("fuse_stages: stage shape " +
                                  shape_str(s.shape()) + " differs from " +
                                  shape_str(s0));
    }
    Tensor<T> cat = concat<T>({stages[0], stages[1], stages[2], stages[3]}, 2);
    Tensor<T> tokens = linear(cat, store.at(prefix + ".w"),
                              store.at(prefix + ".b"));

    const index_t B = tokens.dim(0);
    const index_t P = tokens.dim(1) - 1;
    const index_t D = tokens.dim(2);
    const index_t side = static_cast<index_t>(std::llround(std::sqrt(
        static_cast<double>(P))));
    if (side * side != P)
        throw config_error("fuse_stages: patch count " + std::to_string(P) +
                           " is not a square grid");

    AlignedFeatures<T> out;
    out.tokens = tokens;
    out.cls = reshape(slice(tokens, 1, 0, 1), {B, D});
    out.map = reshape(permute(reshape(slice(tokens, 1, 1, P), {B, P, D}),
                              {0, 2, 1}),
                      {B, D, side, side});
    out.map_h = side;
    out.map_w = side;
    return out;
}

}  // namespace vpr
