#pragma once

#include <array>
#include <string>

#include "vpr/ops.hpp"
#include "vpr/params.hpp"

namespace vpr {

// Staged ViT feature extractor. The block sequence is split into four
// equal stages; the token sequence after each stage is recorded so the
// fusion module can consume shallow-to-deep features.
struct BackboneConfig {
    int embed_dim = 384;
    int depth = 12;
    int heads = 6;
    double mlp_ratio = 4.0;
    int patch_size = 14;
    int image_size = 224;
    bool adapter_enabled = false;
    int adapter_rank = 256;
    static constexpr int stages = 4;

    int grid_side() const { return image_size / patch_size; }
    int num_patches() const { return grid_side() * grid_side(); }
    int tokens() const { return 1 + num_patches(); }
    int ff_dim() const { return static_cast<int>(embed_dim * mlp_ratio); }
    int blocks_per_stage() const { return depth / stages; }

    void validate() const {
        if (depth % stages != 0)
            throw config_error("backbone: depth " + std::to_string(depth) +
                               " not divisible by " + std::to_string(stages) +
                               " stages");
        if (image_size % patch_size != 0)
            throw config_error("backbone: image size " +
                               std::to_string(image_size) +
                               " not divisible by patch size " +
                               std::to_string(patch_size));
        if (embed_dim % heads != 0)
            throw config_error("backbone: embed dim " +
                               std::to_string(embed_dim) +
                               " not divisible by heads " +
                               std::to_string(heads));
        if (adapter_enabled && adapter_rank <= 0)
            throw config_error("backbone: adapter rank must be positive");
    }
};

template <typename T>
using StageOutputs = std::array<Tensor<T>, 4>;

namespace backbone_detail {

inline std::string blk(const std::string& prefix, int i) {
    return prefix + ".block" + std::to_string(i);
}

}  // namespace backbone_detail

// Registers all backbone parameters under `prefix`. Residual-branch output
// projections (attention out, MLP out, adapter up) are zero-initialized so
// a fresh backbone is the identity on tokens.
template <typename T>
void init_backbone(ParamStore<T>& store, const std::string& prefix,
                   const BackboneConfig& cfg, RngState& rng) {
    cfg.validate();
    const index_t d = cfg.embed_dim;
    const index_t ff = cfg.ff_dim();
    const index_t patch_in = 3LL * cfg.patch_size * cfg.patch_size;
    const double ws = 0.02;

    store.add_randn(prefix + ".patch.w", {patch_in, d}, rng, ws);
    store.add_zeros(prefix + ".patch.b", {d});
    store.add_randn(prefix + ".cls", {d}, rng, ws);
    store.add_randn(prefix + ".pos", {cfg.tokens(), d}, rng, ws);

    for (int i = 0; i < cfg.depth; ++i) {
        const std::string b = backbone_detail::blk(prefix, i);
        store.add_filled(b + ".ln1.g", {d}, T(1));
        store.add_zeros(b + ".ln1.b", {d});
        store.add_randn(b + ".attn.wq", {d, d}, rng, ws);
        store.add_zeros(b + ".attn.bq", {d});
        store.add_randn(b + ".attn.wk", {d, d}, rng, ws);
        store.add_zeros(b + ".attn.bk", {d});
        store.add_randn(b + ".attn.wv", {d, d}, rng, ws);
        store.add_zeros(b + ".attn.bv", {d});
        store.add_zeros(b + ".attn.wo", {d, d});
        store.add_zeros(b + ".attn.bo", {d});
        store.add_filled(b + ".ln2.g", {d}, T(1));
        store.add_zeros(b + ".ln2.b", {d});
        store.add_randn(b + ".mlp.w1", {d, ff}, rng, ws);
        store.add_zeros(b + ".mlp.b1", {ff});
        store.add_zeros(b + ".mlp.w2", {ff, d});
        store.add_zeros(b + ".mlp.b2", {d});
        if (cfg.adapter_enabled) {
            const index_t r = cfg.adapter_rank;
            store.add_randn(b + ".adapter.down.w", {d, r}, rng, ws);
            store.add_zeros(b + ".adapter.down.b", {r});
            store.add_zeros(b + ".adapter.up.w", {r, d});
            store.add_zeros(b + ".adapter.up.b", {d});
        }
    }
}

template <typename T>
AttnParams<T> attn_params(const ParamStore<T>& store, const std::string& b) {
    return AttnParams<T>{store.at(b + ".attn.wq"), store.at(b + ".attn.bq"),
                         store.at(b + ".attn.wk"), store.at(b + ".attn.bk"),
                         store.at(b + ".attn.wv"), store.at(b + ".attn.bv"),
                         store.at(b + ".attn.wo"), store.at(b + ".attn.bo")};
}

// [B,3,H,W] -> [B,1+P,d]: patch projection, class token, position embedding.
template <typename T>
Tensor<T> patch_embed(const Tensor<T>& images, const ParamStore<T>& store,
                      const std::string& prefix, const BackboneConfig& cfg) {
    if (images.ndim() != 4 || images.dim(1) != 3 ||
        images.dim(2) != cfg.image_size || images.dim(3) != cfg.image_size) {
        throw config_error("patch_embed: expected [B,3," +
                           std::to_string(cfg.image_size) + "," +
                           std::to_string(cfg.image_size) + "], got " +
                           shape_str(images.shape()));
    }
    const index_t B = images.dim(0);
    Tensor<T> patches = im2patches(images, cfg.patch_size);
    Tensor<T> tokens = linear(patches, store.at(prefix + ".patch.w"),
                              store.at(prefix + ".patch.b"));
    Tensor<T> cls = expand_token(store.at(prefix + ".cls"), B);
    Tensor<T> seq = concat<T>({cls, tokens}, 1);
    return add_broadcast_rows(seq, store.at(prefix + ".pos"));
}

// One pre-norm transformer block, with an optional serial bottleneck
// adapter after the MLP sub-block.
template <typename T>
Tensor<T> backbone_block(const Tensor<T>& x, const ParamStore<T>& store,
                         const std::string& b, const BackboneConfig& cfg) {
    Tensor<T> h = add(x, mhsa(layer_norm(x, store.at(b + ".ln1.g"),
                                         store.at(b + ".ln1.b")),
                              attn_params(store, b), cfg.heads));
    Tensor<T> m = linear(gelu(linear(layer_norm(h, store.at(b + ".ln2.g"),
                                                store.at(b + ".ln2.b")),
                                     store.at(b + ".mlp.w1"),
                                     store.at(b + ".mlp.b1"))),
                         store.at(b + ".mlp.w2"), store.at(b + ".mlp.b2"));
    Tensor<T> out = add(h, m);
    if (cfg.adapter_enabled) {
        Tensor<T> a = linear(gelu(linear(out, store.at(b + ".adapter.down.w"),
                                         store.at(b + ".adapter.down.b"))),
                             store.at(b + ".adapter.up.w"),
                             store.at(b + ".adapter.up.b"));
        out = add(out, a);
    }
    return out;
}

// Runs all blocks and records the token sequence at each stage boundary.
template <typename T>
StageOutputs<T> run_stages(const Tensor<T>& tokens, const ParamStore<T>& store,
                           const std::string& prefix,
                           const BackboneConfig& cfg) {
    StageOutputs<T> out;
    Tensor<T> x = tokens;
    const int per_stage = cfg.blocks_per_stage();
    for (int i = 0; i < cfg.depth; ++i) {
        x = backbone_block(x, store, backbone_detail::blk(prefix, i), cfg);
        if ((i + 1) % per_stage == 0)
            out[static_cast<std::size_t>((i + 1) / per_stage - 1)] = x;
    }
    return out;
}

// Marks patch embedding and the first fraction*depth blocks frozen;
// adapters inside frozen blocks stay trainable. fraction must be 0, 3/4
// or 1.
template <typename T>
void freeze_prefix(ParamStore<T>& store, const std::string& prefix,
                   const BackboneConfig& cfg, double fraction) {
    if (fraction != 0.0 && fraction != 0.75 && fraction != 1.0)
        throw config_error("freeze_prefix: fraction must be 0, 0.75 or 1");
    if (fraction == 0.0) return;
    const int k = static_cast<int>(fraction * cfg.depth + 0.5);
    store.freeze_if([&](const std::string& name) {
        if (name.rfind(prefix + ".patch.", 0) == 0) return true;
        if (name == prefix + ".cls" || name == prefix + ".pos") return true;
        for (int i = 0; i < k; ++i) {
            const std::string b = backbone_detail::blk(prefix, i) + ".";
            if (name.rfind(b, 0) == 0)
                return name.find(".adapter.") == std::string::npos;
        }
        return false;
    });
}

}  // namespace vpr
