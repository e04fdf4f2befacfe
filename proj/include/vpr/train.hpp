#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "vpr/losses.hpp"
#include "vpr/model.hpp"
#include "vpr/optim.hpp"

namespace vpr {

// Raw pixel storage, independent of the tensor graph.
struct ImageData {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;  // [3,H,W] row-major
};

struct TrainImage {
    std::int64_t id = 0;
    std::int64_t place_id = 0;
    ImageData image;
};

using TrainSet = std::vector<TrainImage>;

template <typename T>
Tensor<T> make_batch(const TrainSet& set, const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw data_error("make_batch: empty batch");
    const int h = set[idx[0]].image.height;
    const int w = set[idx[0]].image.width;
    const index_t per = 3LL * h * w;
    std::vector<T> data(static_cast<std::size_t>(idx.size()) *
                        static_cast<std::size_t>(per));
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const auto& img = set[idx[b]].image;
        if (img.height != h || img.width != w)
            throw data_error("make_batch: mixed image sizes");
        for (index_t q = 0; q < per; ++q)
            data[b * static_cast<std::size_t>(per) + static_cast<std::size_t>(q)] =
                static_cast<T>(img.pixels[static_cast<std::size_t>(q)]);
    }
    return Tensor<T>::from_data({static_cast<index_t>(idx.size()), 3, h, w},
                                std::move(data));
}

struct TrainCurve {
    std::vector<std::pair<int, double>> points;  // (step, loss)
    int replacement_samples = 0;  // images drawn with replacement

    double first_loss() const { return points.front().second; }
    double last_loss() const { return points.back().second; }
};

struct DistillConfig {
    int steps = 200;
    int batch = 8;
    double lr = 2.5e-5;
    std::uint64_t seed = 0;
    bool token_level = true;       // match fused student tokens to teacher tokens
    bool descriptor_level = false; // additionally match final descriptors
};

// Stage 1: the whole student is trained to match the frozen teacher.
template <typename T>
TrainCurve distill_stage(StudentModel<T>& student, const TeacherModel<T>& teacher,
                         const TrainSet& data, const DistillConfig& cfg) {
    if (data.empty()) throw data_error("distill_stage: no training images");
    if (!cfg.token_level && !cfg.descriptor_level)
        throw config_error("distill_stage: at least one objective required");
    OptimConfig oc;
    oc.kind = OptimKind::adam;
    oc.lr = cfg.lr;
    Optimizer<T> opt(oc, student.store);
    RngState rng(cfg.seed);

    TrainCurve curve;
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();  // triggers shuffle on first step

    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<std::size_t> batch;
        for (int b = 0; b < cfg.batch; ++b) {
            if (cursor >= order.size()) {
                // deterministic Fisher-Yates reshuffle per epoch
                for (std::size_t i = order.size(); i > 1; --i) {
                    const std::size_t j =
                        static_cast<std::size_t>(rng.uniform_index(i));
                    std::swap(order[i - 1], order[j]);
                }
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }
        Tensor<T> images = make_batch<T>(data, batch);
        student.store.zero_grads();

        Tensor<T> loss;
        if (cfg.token_level) {
            Tensor<T> target = teacher.forward_tokens(images);
            target.set_requires_grad(false);
            AlignedFeatures<T> aligned = student.forward_aligned(images);
            loss = mse_distill_loss(aligned.tokens, target);
        }
        if (cfg.descriptor_level) {
            Tensor<T> tdesc = teacher.forward_descriptor(images);
            tdesc.set_requires_grad(false);
            Tensor<T> sdesc = student.forward_descriptor(
                images, student.cfg.encoder.enabled);
            Tensor<T> dl = mse_distill_loss(sdesc, tdesc);
            loss = cfg.token_level ? add(loss, dl) : dl;
        }
        const double lv = static_cast<double>(loss.item());
        if (!std::isfinite(lv))
            throw numeric_error("distill_stage: non-finite loss at step " +
                                std::to_string(step));
        loss.backward();
        opt.step(student.store);
        curve.points.emplace_back(step, lv);
    }
    return curve;
}

struct FinetuneConfig {
    int steps = 100;
    int places_per_batch = 8;
    int imgs_per_place = 4;
    double lr = 2e-4;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;
    double freeze_fraction = 0.75;
    bool use_encoder = true;
    LossConfig loss;
};

// Stage 2: metric fine-tuning on place-labelled batches. The backbone
// prefix is frozen; adapters, the last stage, fusion, aggregation and the
// encoder keep training.
template <typename T>
TrainCurve finetune_stage(StudentModel<T>& student, const TrainSet& data,
                          const FinetuneConfig& cfg) {
    cfg.loss.validate();
    if (data.empty()) throw data_error("finetune_stage: no training images");
    freeze_prefix(student.store, StudentModel<T>::kBackbone,
                  student.cfg.backbone, cfg.freeze_fraction);

    // group image indices by place
    std::vector<std::int64_t> places;
    std::vector<std::vector<std::size_t>> by_place;
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto it = std::find(places.begin(), places.end(), data[i].place_id);
        if (it == places.end()) {
            places.push_back(data[i].place_id);
            by_place.push_back({i});
        } else {
            by_place[static_cast<std::size_t>(it - places.begin())].push_back(i);
        }
    }

    OptimConfig oc;
    oc.kind = OptimKind::adamw;
    oc.lr = cfg.lr;
    oc.weight_decay = cfg.weight_decay;
    Optimizer<T> opt(oc, student.store);
    RngState rng(cfg.seed);

    TrainCurve curve;
    std::vector<std::size_t> order(places.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();

    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<std::size_t> batch;
        std::vector<int> labels;
        for (int g = 0; g < cfg.places_per_batch; ++g) {
            if (cursor >= order.size()) {
                for (std::size_t i = order.size(); i > 1; --i) {
                    const std::size_t j =
                        static_cast<std::size_t>(rng.uniform_index(i));
                    std::swap(order[i - 1], order[j]);
                }
                cursor = 0;
            }
            const std::size_t p = order[cursor++];
            const auto& imgs = by_place[p];
            for (int k = 0; k < cfg.imgs_per_place; ++k) {
                std::size_t pick;
                if (k < static_cast<int>(imgs.size())) {
                    pick = imgs[static_cast<std::size_t>(k)];
                } else {
                    pick = imgs[static_cast<std::size_t>(
                        rng.uniform_index(imgs.size()))];
                    ++curve.replacement_samples;
                }
                batch.push_back(pick);
                labels.push_back(static_cast<int>(p));
            }
        }
        Tensor<T> images = make_batch<T>(data, batch);
        student.store.zero_grads();
        Tensor<T> desc = student.forward_descriptor(images, cfg.use_encoder);
        Tensor<T> loss = ms_loss(desc, labels, cfg.loss);
        const double lv = static_cast<double>(loss.item());
        if (!std::isfinite(lv))
            throw numeric_error("finetune_stage: non-finite loss at step " +
                                std::to_string(step));
        loss.backward();
        opt.step(student.store);
        curve.points.emplace_back(step, lv);
    }
    return curve;
}

}  // namespace vpr
