#include "vpr/analysis.hpp"

#include <cmath>
#include <sstream>

namespace vpr {

ComponentBreakdown count_params(const ModelConfig& cfg) {
    cfg.validate();
    const std::int64_t d = cfg.backbone.embed_dim;
    const std::int64_t ff = cfg.backbone.ff_dim();
    const std::int64_t depth = cfg.backbone.depth;
    const std::int64_t P = cfg.backbone.num_patches();
    const std::int64_t ps = cfg.backbone.patch_size;
    const std::int64_t D = cfg.teacher_dim;

    ComponentBreakdown out;
    out.backbone = (3 * ps * ps) * d + d  // patch projection
                   + d                    // class token
                   + (1 + P) * d          // position embeddings
                   + depth * (2 * d                 // ln1
                              + 4 * (d * d + d)     // attention
                              + 2 * d               // ln2
                              + d * ff + ff + ff * d + d);  // mlp
    if (cfg.backbone.adapter_enabled) {
        const std::int64_t r = cfg.backbone.adapter_rank;
        out.adapter = depth * (d * r + r + r * d + d);
    }
    out.fusion = 4 * d * D + D;

    const std::int64_t c = cfg.agg.gen_hidden;
    std::int64_t pe = 0;
    for (int lv = 0; lv < 3; ++lv) {
        const std::int64_t side = cfg.agg.grid_side(lv);
        pe += 4 * side * side * D + D;
    }
    out.aggregator = (2 * D) * c + c      // generator conv1 (1x1)
                     + 4 * c * 9 + 4      // generator conv2 (3x3)
                     + 2 * (D * D + D)    // medium/global fusion linears
                     + pe                 // position-embedding linears
                     + 3;                 // per-level GeM exponents

    const std::int64_t ffe = cfg.encoder.ff_dim;
    out.encoder = static_cast<std::int64_t>(cfg.encoder.layers) *
                  (4 * (D * D + D)        // attention
                   + D * ffe + ffe + ffe * D + D  // mlp
                   + 4 * D);              // two layer-norms
    return out;
}

FlopsBreakdown estimate_flops(const ModelConfig& cfg, int image_size,
                              int batch) {
    cfg.validate();
    if (image_size % cfg.backbone.patch_size != 0)
        throw config_error("estimate_flops: image size " +
                           std::to_string(image_size) +
                           " not divisible by patch size");
    const double B = batch;
    const double d = cfg.backbone.embed_dim;
    const double ff = cfg.backbone.ff_dim();
    const double depth = cfg.backbone.depth;
    const double ps = cfg.backbone.patch_size;
    const double side = image_size / cfg.backbone.patch_size;
    const double P = side * side;
    const double T = P + 1;
    const double D = cfg.teacher_dim;
    const double c = cfg.agg.gen_hidden;

    FlopsBreakdown out;
    out.backbone_macs =
        B * P * (3 * ps * ps) * d                       // patch projection
        + depth * (B * T * d * d * 4                    // qkv + out proj
                   + 2 * B * T * T * d                  // scores + context
                   + 2 * B * T * d * ff);               // mlp
    if (cfg.backbone.adapter_enabled)
        out.adapter_macs =
            depth * 2 * B * T * d * cfg.backbone.adapter_rank;
    out.fusion_macs = B * T * (4 * d) * D;

    const double g2 = cfg.agg.grid_global * cfg.agg.grid_global;
    const double m2 = cfg.agg.grid_medium * cfg.agg.grid_medium;
    const double s2 = cfg.agg.grid_small * cfg.agg.grid_small;
    const double sample_pts = g2 + 4 * m2 + 9 * s2;
    out.aggregator_macs = B * P * (2 * D) * c   // generator conv1
                          + B * P * 9 * c * 4   // generator conv2
                          + B * 5 * D * D       // fusion linears (4 medium + 1 global)
                          + B * 4 * (g2 + 4 * m2 + 9 * s2) * D;  // pe linears

    const double ffe = cfg.encoder.ff_dim;
    out.encoder_linear_macs =
        cfg.encoder.layers * 14.0 * (B * 4 * D * D + B * 2 * D * ffe);
    out.encoder_attn_macs = cfg.encoder.layers * 14.0 * 2 * B * B * D;

    // documented per-element costs; small next to the matrix work
    const double ln_elems = depth * 2 * B * T * d +
                            cfg.encoder.layers * 2 * 14 * B * D;
    const double softmax_elems =
        depth * B * cfg.backbone.heads * T * T +
        cfg.encoder.layers * 14 * B * B * cfg.encoder.heads;
    const double gelu_elems =
        depth * B * T * ff + B * P * c + cfg.encoder.layers * 14 * B * ffe;
    const double bilinear_vals = B * sample_pts * (D + 4.0);
    const double gem_elems = B * sample_pts * D;
    out.elementwise_flops = 5 * (ln_elems + softmax_elems + gelu_elems) +
                            8 * bilinear_vals + 3 * gem_elems;
    return out;
}

namespace {

struct Row {
    std::string name;
    double value;
    double reference;
};

std::vector<Row> make_rows(const ModelConfig& cfg, int image_size, int batch,
                           FlopsConvention conv) {
    const ComponentBreakdown p = count_params(cfg);
    const FlopsBreakdown f = estimate_flops(cfg, image_size, batch);
    const ReferenceTotals ref;
    return {
        {"params.adapter", static_cast<double>(p.adapter), ref.adapter},
        {"params.backbone", static_cast<double>(p.backbone), ref.backbone},
        {"params.fusion", static_cast<double>(p.fusion), ref.fusion},
        {"params.aggregator", static_cast<double>(p.aggregator), ref.aggregator},
        {"params.encoder", static_cast<double>(p.encoder), ref.encoder},
        {"params.total_no_encoder", static_cast<double>(p.total(false)),
         ref.total_no_encoder},
        {"params.total", static_cast<double>(p.total(true)), ref.total},
        {"gflops.no_encoder", f.total(conv, false) / 1e9,
         ref.gflops_no_encoder},
        {"gflops.encoder", f.total(conv, true) / 1e9, ref.gflops_encoder},
    };
}

std::string fmt(double v) {
    std::ostringstream os;
    if (v >= 1e6)
        os << v / 1e6 << "M";
    else
        os << v;
    return os.str();
}

}  // namespace

std::string analysis_table_markdown(const ModelConfig& cfg, int image_size,
                                    int batch, FlopsConvention conv) {
    std::ostringstream os;
    os << "| quantity | artifact | reference | rel. error |\n";
    os << "|---|---|---|---|\n";
    for (const Row& r : make_rows(cfg, image_size, batch, conv)) {
        const double rel = std::abs(r.value - r.reference) / r.reference;
        os << "| " << r.name << " | " << fmt(r.value) << " | "
           << fmt(r.reference) << " | " << rel * 100.0 << "% |\n";
    }
    return os.str();
}

std::string analysis_table_csv(const ModelConfig& cfg, int image_size,
                               int batch, FlopsConvention conv) {
    std::ostringstream os;
    os << "quantity,artifact,reference,rel_error\n";
    for (const Row& r : make_rows(cfg, image_size, batch, conv)) {
        const double rel = std::abs(r.value - r.reference) / r.reference;
        os << r.name << "," << r.value << "," << r.reference << "," << rel
           << "\n";
    }
    return os.str();
}

}  // namespace vpr
