#pragma once

#include <string>
#include <vector>

#include "vpr/aggregator.hpp"

namespace vpr {

// Transformer encoder applying self-attention ACROSS the images of a
// batch, independently per region slot with shared weights. There is no
// positional encoding over the batch axis, so outputs are equivariant to
// batch permutation, and a batch of one has no cross-image interaction.
struct EncoderConfig {
    int layers = 2;
    int model_dim = 768;
    int heads = 16;
    int ff_dim = 2048;
    bool enabled = true;

    void validate() const {
        if (model_dim % heads != 0)
            throw config_error("encoder: model dim " +
                               std::to_string(model_dim) +
                               " not divisible by heads " +
                               std::to_string(heads));
    }
};

template <typename T>
void init_cross_encoder(ParamStore<T>& store, const std::string& prefix,
                        const EncoderConfig& cfg, RngState& rng) {
    cfg.validate();
    const index_t d = cfg.model_dim, ff = cfg.ff_dim;
    for (int i = 0; i < cfg.layers; ++i) {
        const std::string l = prefix + ".layer" + std::to_string(i);
        store.add_filled(l + ".ln1.g", {d}, T(1));
        store.add_zeros(l + ".ln1.b", {d});
        store.add_randn(l + ".attn.wq", {d, d}, rng, 0.02);
        store.add_zeros(l + ".attn.bq", {d});
        store.add_randn(l + ".attn.wk", {d, d}, rng, 0.02);
        store.add_zeros(l + ".attn.bk", {d});
        store.add_randn(l + ".attn.wv", {d, d}, rng, 0.02);
        store.add_zeros(l + ".attn.bv", {d});
        store.add_randn(l + ".attn.wo", {d, d}, rng, 0.02);
        store.add_zeros(l + ".attn.bo", {d});
        store.add_filled(l + ".ln2.g", {d}, T(1));
        store.add_zeros(l + ".ln2.b", {d});
        store.add_randn(l + ".mlp.w1", {d, ff}, rng, 0.02);
        store.add_zeros(l + ".mlp.b1", {ff});
        store.add_randn(l + ".mlp.w2", {ff, d}, rng, 0.02);
        store.add_zeros(l + ".mlp.b2", {d});
    }
}

// 14 slot descriptors [B,D] -> same, after cross-image attention. The
// slot axis is treated as the batch of the attention, the image axis as
// the token axis.
template <typename T>
std::vector<Tensor<T>> cross_image_encode(const std::vector<Tensor<T>>& slots,
                                          const ParamStore<T>& store,
                                          const std::string& prefix,
                                          const EncoderConfig& cfg) {
    cfg.validate();
    const index_t B = slots[0].dim(0), D = slots[0].dim(1);
    if (D != cfg.model_dim)
        throw config_error("cross_image_encode: descriptor width " +
                           std::to_string(D) + " does not match encoder dim " +
                           std::to_string(cfg.model_dim));
    const index_t S = static_cast<index_t>(slots.size());
    std::vector<Tensor<T>> rows;
    for (const auto& s : slots) rows.push_back(reshape(s, {1, B, D}));
    Tensor<T> x = concat<T>(rows, 0);  // [S,B,D]
    for (int i = 0; i < cfg.layers; ++i) {
        const std::string l = prefix + ".layer" + std::to_string(i);
        x = add(x, mhsa(layer_norm(x, store.at(l + ".ln1.g"),
                                   store.at(l + ".ln1.b")),
                        attn_params(store, l), cfg.heads));
        x = add(x, linear(gelu(linear(layer_norm(x, store.at(l + ".ln2.g"),
                                                 store.at(l + ".ln2.b")),
                                      store.at(l + ".mlp.w1"),
                                      store.at(l + ".mlp.b1"))),
                          store.at(l + ".mlp.w2"), store.at(l + ".mlp.b2")));
    }
    std::vector<Tensor<T>> out;
    for (index_t s = 0; s < S; ++s)
        out.push_back(reshape(slice(x, 0, s, 1), {B, D}));
    return out;
}

// Concatenate the 14 region vectors in canonical order and L2-normalize.
template <typename T>
Tensor<T> assemble_descriptor(const std::vector<Tensor<T>>& slots,
                              const ParamStore<T>& store,
                              const std::string& prefix,
                              const EncoderConfig& cfg, bool use_encoder) {
    std::vector<Tensor<T>> parts =
        use_encoder ? cross_image_encode(slots, store, prefix, cfg) : slots;
    return l2_normalize_lastaxis(concat<T>(parts, 1));
}

}  // namespace vpr
