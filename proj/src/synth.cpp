#include "vpr/synth.hpp"

#include <algorithm>
#include <cmath>

namespace vpr {

namespace {

constexpr int kFieldSide = 7;  // low-res pattern grid per channel

// Bilinear lookup into the place's pattern field, clamped at the edges.
double field_at(const std::vector<double>& field, int channel, double fy,
                double fx) {
    const int n = kFieldSide;
    fx = std::clamp(fx, 0.0, static_cast<double>(n - 1));
    fy = std::clamp(fy, 0.0, static_cast<double>(n - 1));
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const int x1 = std::min(x0 + 1, n - 1);
    const int y1 = std::min(y0 + 1, n - 1);
    const double ax = fx - x0, ay = fy - y0;
    auto at = [&](int y, int x) {
        return field[static_cast<std::size_t>((channel * n + y) * n + x)];
    };
    return at(y0, x0) * (1 - ay) * (1 - ax) + at(y0, x1) * (1 - ay) * ax +
           at(y1, x0) * ay * (1 - ax) + at(y1, x1) * ay * ax;
}

}  // namespace

SynthDataset synth_dataset_gen(const SynthConfig& cfg) {
    cfg.validate();
    SynthDataset out;
    RngState root(cfg.seed);

    const int grid_cols = 8;
    std::int64_t next_id = 0;
    for (int p = 0; p < cfg.num_places; ++p) {
        RngState place_rng = root.fork(static_cast<std::uint64_t>(p));

        // per-place smooth pattern, 3 channels
        std::vector<double> field(3 * kFieldSide * kFieldSide);
        for (auto& v : field) v = place_rng.uniform();

        const double place_e = 1000.0 + 150.0 * (p % grid_cols);
        const double place_n = 1000.0 + 150.0 * (p / grid_cols);
        const double base_heading = place_rng.uniform(0.0, 360.0);

        for (int k = 0; k < cfg.imgs_per_place; ++k) {
            RngState img_rng = place_rng.fork(static_cast<std::uint64_t>(k + 1));
            const double dx_px = img_rng.uniform(-cfg.shift_px, cfg.shift_px);
            const double dy_px = img_rng.uniform(-cfg.shift_px, cfg.shift_px);
            const double gain =
                1.0 + img_rng.uniform(-cfg.brightness, cfg.brightness);

            TrainImage img;
            img.id = next_id;
            img.place_id = p;
            img.image.height = cfg.image_size;
            img.image.width = cfg.image_size;
            img.image.pixels.resize(static_cast<std::size_t>(3) *
                                    cfg.image_size * cfg.image_size);
            const double scale =
                static_cast<double>(kFieldSide - 1) / (cfg.image_size - 1);
            std::size_t q = 0;
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < cfg.image_size; ++y)
                    for (int x = 0; x < cfg.image_size; ++x) {
                        const double fy = (y + dy_px) * scale;
                        const double fx = (x + dx_px) * scale;
                        double v = field_at(field, c, fy, fx) * gain;
                        if (cfg.noise > 0.0)
                            v += img_rng.normal(0.0, cfg.noise);
                        img.image.pixels[q++] = static_cast<float>(
                            std::clamp(v, 0.0, 1.0));
                    }

            PlaceRecord rec;
            rec.id = next_id;
            rec.place_id = p;
            rec.easting = place_e + img_rng.uniform(-3.5, 3.5);
            rec.northing = place_n + img_rng.uniform(-3.5, 3.5);
            double h = base_heading + img_rng.uniform(-15.0, 15.0);
            h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0);
            rec.heading = h;
            rec.frame = static_cast<std::int64_t>(p) * 100 + k;
            rec.split = k == 0 ? "database" : (k == 1 ? "query" : "train");
            rec.validate();

            out.images.push_back(std::move(img));
            out.records.push_back(std::move(rec));
            ++next_id;
        }
    }
    return out;
}

}  // namespace vpr
