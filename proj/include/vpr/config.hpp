#pragma once

#include <string>
#include <vector>

#include "vpr/model.hpp"
#include "vpr/synth.hpp"
#include "vpr/train.hpp"

namespace vpr {

// One JSON config drives every pipeline command. Presets fill defaults;
// explicit keys override them. Unknown keys are rejected by name.
struct RunConfig {
    std::string preset = "toy";  // toy | full
    std::uint64_t seed = 0;
    std::string workdir = "run";

    SynthConfig data;
    DistillConfig distill;
    FinetuneConfig finetune;

    struct EvalConfig {
        int batch = 8;
        bool use_encoder = true;
        int pca_dim = 0;  // 0 = no reduction
        std::string mode = "geo:25";
        std::vector<int> ns = {1, 5, 10};
    } eval;

    ModelConfig model() const {
        ModelConfig m =
            preset == "full" ? full_student_config() : toy_student_config();
        return m;
    }

    static RunConfig load(const std::string& path);
    static RunConfig from_json_text(const std::string& text,
                                    const std::string& origin);
};

}  // namespace vpr
