#pragma once

#include <cstdint>
#include <string>

#include "vpr/model.hpp"

namespace vpr {

// Exact parameter enumeration from configuration arithmetic. Mirrors the
// registration in the init_* functions one-to-one; a live model's store
// must agree exactly (cross-checked in tests).
struct ComponentBreakdown {
    std::int64_t backbone = 0;   // without adapters
    std::int64_t adapter = 0;
    std::int64_t fusion = 0;
    std::int64_t aggregator = 0;
    std::int64_t encoder = 0;

    std::int64_t total(bool with_encoder) const {
        return backbone + adapter + fusion + aggregator +
               (with_encoder ? encoder : 0);
    }
};

ComponentBreakdown count_params(const ModelConfig& cfg);

// FLOPs accounting. Matrix work is tallied in MACs per component;
// `Convention` decides whether one MAC reports as one FLOP (the usual
// profiler-style convention in retrieval papers) or two (multiply + add).
// Elementwise costs use fixed documented rates: layer-norm, softmax and
// gelu at 5 FLOPs/element, bilinear samples at 8 FLOPs/value, GeM at
// 3 FLOPs/element.
enum class FlopsConvention { mac, two_per_mac };

struct FlopsBreakdown {
    double backbone_macs = 0;
    double adapter_macs = 0;
    double fusion_macs = 0;
    double aggregator_macs = 0;
    double encoder_linear_macs = 0;
    double encoder_attn_macs = 0;  // scales with batch^2
    double elementwise_flops = 0;

    double total_macs(bool with_encoder) const {
        return backbone_macs + adapter_macs + fusion_macs + aggregator_macs +
               (with_encoder ? encoder_linear_macs + encoder_attn_macs : 0.0);
    }
    double total(FlopsConvention conv, bool with_encoder) const {
        const double mult = conv == FlopsConvention::mac ? 1.0 : 2.0;
        return mult * total_macs(with_encoder) + elementwise_flops;
    }
};

// Forward cost of one batch at the given input size.
FlopsBreakdown estimate_flops(const ModelConfig& cfg, int image_size,
                              int batch);

// Published reference totals for the full-scale configuration, used by
// the `analyze` comparison table.
struct ReferenceTotals {
    double adapter = 2.30e6;
    double backbone = 22.16e6;
    double fusion = 1.17e6;
    double aggregator = 1.58e6;
    double encoder = 11.03e6;
    double total_no_encoder = 27.21e6;
    double total = 38.24e6;
    double gflops_no_encoder = 9.05;
    double gflops_encoder = 9.14;
};

std::string analysis_table_markdown(const ModelConfig& cfg, int image_size,
                                    int batch, FlopsConvention conv);
std::string analysis_table_csv(const ModelConfig& cfg, int image_size,
                               int batch, FlopsConvention conv);

}  // namespace vpr
