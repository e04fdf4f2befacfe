#include <doctest.h>

#include "support.hpp"

using namespace vpr;
using namespace vprtest;

TEST_SUITE_BEGIN("sampling");

TEST_CASE("grid_sample: center of a 2x2 map averages all four pixels") {
    auto f = Tensor<double>::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    auto g = Tensor<double>::from_data({1, 1, 1, 2}, {0, 0});
    CHECK(grid_sample_bilinear(f, g).data()[0] == doctest::Approx(2.5));
}

TEST_CASE("grid_sample: corners hit exact pixels") {
    auto f = Tensor<double>::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    auto tl = Tensor<double>::from_data({1, 1, 1, 2}, {-1, -1});
    auto tr = Tensor<double>::from_data({1, 1, 1, 2}, {1, -1});
    CHECK(grid_sample_bilinear(f, tl).data()[0] == doctest::Approx(1.0));
    CHECK(grid_sample_bilinear(f, tr).data()[0] == doctest::Approx(2.0));
}

TEST_CASE("grid_sample: pixel centers return stored values exactly") {
    RngState rng(21);
    auto f = rand_tensor({1, 2, 3, 4}, rng);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) {
            auto g = Tensor<double>::from_data(
                {1, 1, 1, 2},
                {2.0 * j / 3.0 - 1.0, 2.0 * i / 2.0 - 1.0});
            auto y = grid_sample_bilinear(f, g);
            CHECK(y.data()[0] ==
                  f.data()[static_cast<std::size_t>(i * 4 + j)]);
            CHECK(y.data()[1] ==
                  f.data()[static_cast<std::size_t>(12 + i * 4 + j)]);
        }
}

TEST_CASE("grid_sample: out-of-range coordinates clamp to the border") {
    auto f = Tensor<double>::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    auto g = Tensor<double>::from_data({1, 1, 1, 2}, {-3.0, -9.0});
    CHECK(grid_sample_bilinear(f, g).data()[0] == doctest::Approx(1.0));
}

TEST_CASE("grid_sample: 1000 random points match the scalar oracle") {
    RngState rng(22);
    int checked = 0;
    while (checked < 1000) {
        const index_t H = 2 + static_cast<index_t>(rng.uniform_index(5));
        const index_t W = 2 + static_cast<index_t>(rng.uniform_index(5));
        auto f = rand_tensor({1, 1, H, W}, rng);
        const index_t pts = 25;
        auto g = Tensor<double>::zeros({1, 1, pts, 2});
        for (index_t q = 0; q < pts; ++q) {
            g.data()[static_cast<std::size_t>(2 * q)] = rng.uniform(-1.3, 1.3);
            g.data()[static_cast<std::size_t>(2 * q + 1)] =
                rng.uniform(-1.3, 1.3);
        }
        auto y = grid_sample_bilinear(f, g);
        for (index_t q = 0; q < pts; ++q) {
            const double ref = bilinear_oracle(
                f.data(), static_cast<int>(H), static_cast<int>(W),
                g.data()[static_cast<std::size_t>(2 * q)],
                g.data()[static_cast<std::size_t>(2 * q + 1)]);
            CHECK(std::abs(y.data()[static_cast<std::size_t>(q)] - ref) < 1e-6);
            ++checked;
        }
    }
}

TEST_CASE("grid_sample: gradients match finite differences") {
    RngState rng(23);
    CHECK(suite_grid_sample(rng, 8) < 1e-5);
}

TEST_CASE("gem_pool: p=1 is the exact spatial mean") {
    RngState rng(24);
    auto f = rand_tensor({2, 3, 2, 2}, rng, 0.1, 2.0);
    auto p = Tensor<double>::filled({1}, 1.0);
    auto y = gem_pool(f, p);
    for (int bc = 0; bc < 6; ++bc) {
        double mean = 0;
        for (int q = 0; q < 4; ++q)
            mean += f.data()[static_cast<std::size_t>(bc * 4 + q)];
        mean /= 4;
        CHECK(y.data()[static_cast<std::size_t>(bc)] ==
              doctest::Approx(mean).epsilon(1e-9));
    }
}

TEST_CASE("gem_pool: [1,2] with p=3 gives cbrt(4.5)") {
    auto f = Tensor<double>::from_data({1, 1, 1, 2}, {1, 2});
    auto p = Tensor<double>::filled({1}, 3.0);
    CHECK(gem_pool(f, p).data()[0] == doctest::Approx(1.650964).epsilon(1e-6));
}

TEST_CASE("gem_pool: large p approaches the spatial max") {
    RngState rng(25);
    auto f = rand_tensor({1, 4, 3, 3}, rng, 0.2, 3.0);
    auto p = Tensor<double>::filled({1}, 100.0);
    auto y = gem_pool(f, p);
    for (int c = 0; c < 4; ++c) {
        double mx = 0;
        for (int q = 0; q < 9; ++q)
            mx = std::max(mx, f.data()[static_cast<std::size_t>(c * 9 + q)]);
        CHECK(std::abs(y.data()[static_cast<std::size_t>(c)] - mx) / mx < 0.01);
    }
}

TEST_CASE("gem_pool: agrees with the scalar oracle") {
    RngState rng(26);
    for (int rep = 0; rep < 20; ++rep) {
        const index_t n = 1 + static_cast<index_t>(rng.uniform_index(6));
        auto f = rand_tensor({1, 1, 1, n}, rng, 0.05, 2.0);
        const double pv = rng.uniform(0.5, 6.0);
        auto p = Tensor<double>::filled({1}, pv);
        CHECK(gem_pool(f, p).data()[0] ==
              doctest::Approx(gem_oracle(f.data(), pv)).epsilon(1e-9));
    }
}

TEST_CASE("gem_pool: p must be positive") {
    auto f = Tensor<double>::filled({1, 1, 1, 2}, 1.0);
    auto p = Tensor<double>::filled({1}, -1.0);
    CHECK_THROWS_AS(gem_pool(f, p), config_error);
}

TEST_CASE("gem_pool: gradients (including p) match finite differences") {
    RngState rng(27);
    CHECK(suite_gem(rng, 8) < 1e-5);
}

TEST_CASE("l2_normalize: 3-4-5 triangle") {
    auto v = Tensor<double>::from_data({1, 2}, {3, 4});
    auto y = l2_normalize_lastaxis(v);
    CHECK(y.data()[0] == doctest::Approx(0.6));
    CHECK(y.data()[1] == doctest::Approx(0.8));
}

TEST_CASE("l2_normalize: unit vectors are fixed points, zero stays zero") {
    auto v = Tensor<double>::from_data({1, 2}, {0.6, 0.8});
    auto y = l2_normalize_lastaxis(v);
    CHECK(y.data()[0] == doctest::Approx(0.6));
    CHECK(y.data()[1] == doctest::Approx(0.8));

    auto z = l2_normalize_lastaxis(Tensor<double>::zeros({1, 3}));
    for (double q : z.data()) CHECK(q == 0.0);
}

TEST_CASE("l2_normalize: outputs have unit norm") {
    RngState rng(28);
    auto x = rand_tensor({5, 7}, rng);
    auto y = l2_normalize_lastaxis(x);
    for (int r = 0; r < 5; ++r) {
        double n = 0;
        for (int j = 0; j < 7; ++j) {
            const double v = y.data()[static_cast<std::size_t>(r * 7 + j)];
            n += v * v;
        }
        CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("l2_normalize: gradients match finite differences") {
    RngState rng(29);
    CHECK(suite_l2norm(rng, 8) < 1e-6);
}

TEST_SUITE_END();
