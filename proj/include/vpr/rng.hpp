#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace vpr {

// Deterministic random stream. Algorithm is fixed so the same seed gives
// bit-identical streams on every run:
//   - state advances with the splitmix64 finalizer (Steele et al.),
//   - uniform doubles take the high 53 bits of each output,
//   - normals come from the Box-Muller transform on two uniforms.
class RngState {
public:
    static constexpr const char* algorithm_id = "splitmix64/box-muller-v1";

    explicit RngState(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // i in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        return n ? next_u64() % n : 0;
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return mean + stddev * r * std::cos(theta);
    }

    // Independent child stream; used for per-place / per-image streams so
    // generation order does not affect determinism.
    RngState fork(std::uint64_t label) {
        std::uint64_t mixed = state_ ^ (0x632BE59BD9B4E019ULL * (label + 1));
        RngState child(mixed);
        child.next_u64();
        return child;
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace vpr
