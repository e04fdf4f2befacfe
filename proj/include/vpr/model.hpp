#pragma once

#include <string>
#include <vector>

#include "vpr/cross_encoder.hpp"

namespace vpr {

// One bundle of configuration for the full student pipeline.
struct ModelConfig {
    BackboneConfig backbone;   // student widths (D/2)
    index_t teacher_dim = 768; // fused feature width D
    AggregatorConfig agg;
    EncoderConfig encoder;

    index_t descriptor_dim() const { return 14 * teacher_dim; }

    void validate() const {
        backbone.validate();
        encoder.validate();
        if (encoder.model_dim != static_cast<int>(teacher_dim))
            throw config_error("model: encoder dim " +
                               std::to_string(encoder.model_dim) +
                               " must equal fused width " +
                               std::to_string(teacher_dim));
    }
};

// Full-scale preset: ViT-S/14 student at 224x224 with rank-256 adapters,
// fused to 768, 2-layer cross-image encoder (16 heads, ff 2048).
inline ModelConfig full_student_config() {
    ModelConfig cfg;
    cfg.backbone = BackboneConfig{384, 12, 6, 4.0, 14, 224, true, 256};
    cfg.teacher_dim = 768;
    cfg.encoder = EncoderConfig{2, 768, 16, 2048, true};
    return cfg;
}

// Desk-scale preset: 42x42 images give a 3x3 feature map, the smallest
// map the region pyramid accepts.
inline ModelConfig toy_student_config() {
    ModelConfig cfg;
    cfg.backbone = BackboneConfig{16, 4, 2, 4.0, 14, 42, true, 4};
    cfg.teacher_dim = 32;
    cfg.encoder = EncoderConfig{2, 32, 4, 64, true};
    return cfg;
}

// Teacher backbone runs at the fused width directly.
inline BackboneConfig teacher_backbone_config(const ModelConfig& student) {
    BackboneConfig t = student.backbone;
    t.embed_dim = static_cast<int>(student.teacher_dim);
    t.heads = student.backbone.heads * 2;
    t.adapter_enabled = false;
    return t;
}

// Splits a raw token sequence [B,1+P,D] into class vector and row-major
// spatial map, mirroring the student's fused features.
template <typename T>
AlignedFeatures<T> split_tokens(const Tensor<T>& tokens) {
    const index_t B = tokens.dim(0);
    const index_t P = tokens.dim(1) - 1;
    const index_t D = tokens.dim(2);
    const index_t side = static_cast<index_t>(std::llround(std::sqrt(
        static_cast<double>(P))));
    if (side * side != P)
        throw config_error("split_tokens: patch count " + std::to_string(P) +
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

template <typename T>
struct StudentModel {
    ModelConfig cfg;
    ParamStore<T> store;

    static constexpr const char* kBackbone = "backbone";
    static constexpr const char* kFusion = "fusion";
    static constexpr const char* kAggregator = "aggregator";
    static constexpr const char* kEncoder = "encoder";

    void init(std::uint64_t seed) {
        cfg.validate();
        RngState rng(seed);
        init_backbone(store, kBackbone, cfg.backbone, rng);
        init_fusion(store, kFusion, cfg.backbone.embed_dim, cfg.teacher_dim,
                    rng);
        init_aggregator(store, kAggregator, cfg.teacher_dim, cfg.agg, rng,
                        /*with_generator=*/true);
        init_cross_encoder(store, kEncoder, cfg.encoder, rng);
    }

    StageOutputs<T> forward_stages(const Tensor<T>& images) const {
        return run_stages(patch_embed(images, store, kBackbone, cfg.backbone),
                          store, kBackbone, cfg.backbone);
    }

    AlignedFeatures<T> forward_aligned(const Tensor<T>& images) const {
        return fuse_stages(forward_stages(images), store, kFusion);
    }

    RegionOutputs<T> forward_regions(const Tensor<T>& images,
                                     GridMode mode) const {
        return aggregate(forward_aligned(images), store, kAggregator, cfg.agg,
                         mode);
    }

    Tensor<T> forward_descriptor(const Tensor<T>& images, bool use_encoder,
                                 GridMode mode = GridMode::deformable) const {
        RegionOutputs<T> regions = forward_regions(images, mode);
        return assemble_descriptor(regions.descriptors, store, kEncoder,
                                   cfg.encoder, use_encoder);
    }
};

// Frozen reference model: a backbone at the fused width with fixed-grid
// aggregation. Deterministic under its seed; never receives updates.
template <typename T>
struct TeacherModel {
    BackboneConfig backbone;
    AggregatorConfig agg;
    ParamStore<T> store;

    static constexpr const char* kBackbone = "backbone";
    static constexpr const char* kAggregator = "aggregator";

    void init(std::uint64_t seed) {
        backbone.validate();
        RngState rng(seed);
        init_backbone(store, kBackbone, backbone, rng);
        init_aggregator(store, kAggregator, backbone.embed_dim, agg, rng,
                        /*with_generator=*/false);
        // teacher weights are a fixed oracle; random but non-degenerate
        // residual branches so its features carry structure
        RngState rng2(seed ^ 0x5bd1e995u);
        for (const auto& e : store.entries()) {
            const bool resid = e.name.find(".attn.wo") != std::string::npos ||
                               e.name.find(".mlp.w2") != std::string::npos;
            if (resid) {
                auto t = e.tensor;
                for (auto& v : t.data())
                    v = static_cast<T>(rng2.normal(0.0, 0.02));
            }
        }
        for (const auto& e : store.entries()) store.freeze(e.name);
    }

    Tensor<T> forward_tokens(const Tensor<T>& images) const {
        StageOutputs<T> stages = run_stages(
            patch_embed(images, store, kBackbone, backbone), store, kBackbone,
            backbone);
        return stages[3];
    }

    Tensor<T> forward_descriptor(const Tensor<T>& images) const {
        RegionOutputs<T> regions =
            aggregate(split_tokens(forward_tokens(images)), store, kAggregator,
                      agg, GridMode::fixed);
        std::vector<Tensor<T>> slots = regions.descriptors;
        return l2_normalize_lastaxis(concat<T>(slots, 1));
    }
};

}  // namespace vpr
