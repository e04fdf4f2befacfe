#include "vpr/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace vpr {

namespace {

using njson = nlohmann::json;

void reject_unknown(const njson& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            throw config_error("config: unknown key '" + where + it.key() +
                               "'");
    }
}

template <typename T>
void take(const njson& obj, const char* key, T& dst) {
    if (obj.contains(key)) dst = obj.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text,
                                    const std::string& origin) {
    njson root;
    try {
        root = njson::parse(text);
    } catch (const std::exception& e) {
        throw config_error(origin + ": malformed JSON: " + e.what());
    }
    if (!root.is_object())
        throw config_error(origin + ": top level must be a JSON object");
    reject_unknown(root, {"preset", "seed", "workdir", "data", "distill",
                          "finetune", "eval"},
                   "");

    RunConfig cfg;
    take(root, "preset", cfg.preset);
    if (cfg.preset != "toy" && cfg.preset != "full")
        throw config_error(origin + ": preset must be 'toy' or 'full', got '" +
                           cfg.preset + "'");

    // preset defaults; explicit keys override below
    if (cfg.preset == "full") {
        cfg.data.image_size = 224;
        cfg.distill.lr = 2.5e-5;
        cfg.distill.batch = 8;
        cfg.finetune.lr = 2e-4;
        cfg.finetune.places_per_batch = 32;  // 128 images per step
        cfg.eval.pca_dim = 4096;
        cfg.eval.batch = 8;
    } else {
        cfg.data.image_size = 42;
        cfg.distill.lr = 1e-3;
        cfg.distill.batch = 16;
        cfg.distill.steps = 200;
        cfg.finetune.lr = 4e-4;
        cfg.finetune.steps = 120;
        cfg.finetune.places_per_batch = 8;
        cfg.eval.pca_dim = 0;
        cfg.eval.batch = 8;
    }

    take(root, "seed", cfg.seed);
    take(root, "workdir", cfg.workdir);
    cfg.data.seed = cfg.seed;
    cfg.distill.seed = cfg.seed;
    cfg.finetune.seed = cfg.seed;

    if (root.contains("data")) {
        const auto& d = root.at("data");
        reject_unknown(d, {"places", "imgs_per_place", "image_size",
                           "shift_px", "brightness", "noise"},
                       "data.");
        take(d, "places", cfg.data.num_places);
        take(d, "imgs_per_place", cfg.data.imgs_per_place);
        take(d, "image_size", cfg.data.image_size);
        take(d, "shift_px", cfg.data.shift_px);
        take(d, "brightness", cfg.data.brightness);
        take(d, "noise", cfg.data.noise);
    }
    if (root.contains("distill")) {
        const auto& d = root.at("distill");
        reject_unknown(d, {"steps", "batch", "lr", "token_level",
                           "descriptor_level"},
                       "distill.");
        take(d, "steps", cfg.distill.steps);
        take(d, "batch", cfg.distill.batch);
        take(d, "lr", cfg.distill.lr);
        take(d, "token_level", cfg.distill.token_level);
        take(d, "descriptor_level", cfg.distill.descriptor_level);
    }
    if (root.contains("finetune")) {
        const auto& d = root.at("finetune");
        reject_unknown(d, {"steps", "places_per_batch", "imgs_per_place", "lr",
                           "weight_decay", "freeze_fraction", "use_encoder",
                           "loss"},
                       "finetune.");
        take(d, "steps", cfg.finetune.steps);
        take(d, "places_per_batch", cfg.finetune.places_per_batch);
        take(d, "imgs_per_place", cfg.finetune.imgs_per_place);
        take(d, "lr", cfg.finetune.lr);
        take(d, "weight_decay", cfg.finetune.weight_decay);
        take(d, "freeze_fraction", cfg.finetune.freeze_fraction);
        take(d, "use_encoder", cfg.finetune.use_encoder);
        if (d.contains("loss")) {
            const auto& l = d.at("loss");
            reject_unknown(l, {"alpha", "beta", "lambda", "mining_eps"},
                           "finetune.loss.");
            take(l, "alpha", cfg.finetune.loss.alpha);
            take(l, "beta", cfg.finetune.loss.beta);
            take(l, "lambda", cfg.finetune.loss.lambda);
            take(l, "mining_eps", cfg.finetune.loss.mining_eps);
        }
    }
    if (root.contains("eval")) {
        const auto& d = root.at("eval");
        reject_unknown(d, {"batch", "use_encoder", "pca_dim", "mode", "ns"},
                       "eval.");
        take(d, "batch", cfg.eval.batch);
        take(d, "use_encoder", cfg.eval.use_encoder);
        take(d, "pca_dim", cfg.eval.pca_dim);
        take(d, "mode", cfg.eval.mode);
        take(d, "ns", cfg.eval.ns);
    }

    cfg.finetune.loss.validate();
    cfg.data.validate();
    GroundTruthMode::parse(cfg.eval.mode);
    const ModelConfig m = cfg.model();
    if (cfg.data.image_size != m.backbone.image_size)
        throw config_error(origin + ": data.image_size " +
                           std::to_string(cfg.data.image_size) +
                           " does not match the '" + cfg.preset +
                           "' preset image size " +
                           std::to_string(m.backbone.image_size));
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error(path + ": cannot open config");
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_json_text(ss.str(), path);
}

}  // namespace vpr
