#pragma once

#include <vector>

#include "vpr/retrieval.hpp"
#include "vpr/train.hpp"

namespace vpr {

// Procedural geo-tagged dataset: each place has a distinctive smooth
// pattern; each image adds a viewpoint shift, a brightness factor and
// pixel noise. Places sit on a grid at least 100 m apart; images of one
// place stay within 5 m of it. Deterministic under seed.
struct SynthConfig {
    int num_places = 32;
    int imgs_per_place = 6;  // index 0 database, 1 query, rest train
    int image_size = 42;
    double shift_px = 2.0;      // max viewpoint shift, pixels
    double brightness = 0.25;   // multiplicative jitter, factor in [1-b, 1+b]
    double noise = 0.05;        // additive gaussian sigma
    std::uint64_t seed = 0;

    void validate() const {
        if (imgs_per_place < 2)
            throw config_error("synth: need at least 2 images per place");
        if (num_places < 1) throw config_error("synth: need at least 1 place");
        if (image_size < 4) throw config_error("synth: image size too small");
    }
};

struct SynthDataset {
    std::vector<TrainImage> images;     // index == record id
    std::vector<PlaceRecord> records;   // geo/frame metadata + split

    std::vector<std::size_t> split_indices(const std::string& split) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < records.size(); ++i)
            if (records[i].split == split) out.push_back(i);
        return out;
    }
};

SynthDataset synth_dataset_gen(const SynthConfig& cfg);

}  // namespace vpr
