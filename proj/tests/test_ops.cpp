#include <doctest.h>

#include "support.hpp"

using namespace vpr;
using namespace vprtest;

TEST_SUITE_BEGIN("ops");

TEST_CASE("linear: one-hot input selects a weight row") {
    auto x = Tensor<double>::from_data({1, 2}, {1, 0});
    auto w = Tensor<double>::from_data({2, 2}, {2, 3, 4, 5});
    auto b = Tensor<double>::zeros({2});
    auto y = linear(x, w, b);
    CHECK(y.data()[0] == doctest::Approx(2.0));
    CHECK(y.data()[1] == doctest::Approx(3.0));
}

TEST_CASE("linear: zero input passes the bias") {
    auto x = Tensor<double>::zeros({1, 2});
    auto w = Tensor<double>::from_data({2, 2}, {9, 8, 7, 6});
    auto b = Tensor<double>::from_data({2}, {7, 7});
    auto y = linear(x, w, b);
    CHECK(y.data()[0] == doctest::Approx(7.0));
    CHECK(y.data()[1] == doctest::Approx(7.0));
}

TEST_CASE("linear: shape mismatch reports both shapes") {
    auto x = Tensor<double>::zeros({1, 3});
    auto w = Tensor<double>::zeros({2, 2});
    auto b = Tensor<double>::zeros({2});
    CHECK_THROWS_WITH_AS(linear(x, w, b),
                         doctest::Contains("[1,3]"), dimension_error);
}

TEST_CASE("linear: gradients match finite differences") {
    RngState rng(11);
    CHECK(suite_linear(rng, 8) < 1e-6);
}

TEST_CASE("conv2d: 1x1 kernel scales") {
    auto x = Tensor<double>::filled({1, 1, 2, 2}, 1.0);
    auto k = Tensor<double>::from_data({1, 1, 1, 1}, {2.0});
    auto b = Tensor<double>::zeros({1});
    auto y = conv2d(x, k, b);
    for (double v : y.data()) CHECK(v == doctest::Approx(2.0));
}

TEST_CASE("conv2d: 3x3 identity kernel preserves the input") {
    RngState rng(3);
    auto x = rand_tensor({1, 1, 4, 4}, rng);
    auto k = Tensor<double>::zeros({1, 1, 3, 3});
    k.data()[4] = 1.0;  // center tap
    auto b = Tensor<double>::zeros({1});
    auto y = conv2d(x, k, b);
    for (std::size_t i = 0; i < x.data().size(); ++i)
        CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("conv2d: matches the six-loop oracle") {
    RngState rng(4);
    for (int rep = 0; rep < 10; ++rep) {
        const int B = 1 + static_cast<int>(rng.uniform_index(2));
        const int C = 1 + static_cast<int>(rng.uniform_index(3));
        const int H = 2 + static_cast<int>(rng.uniform_index(4));
        const int W = 2 + static_cast<int>(rng.uniform_index(4));
        const int Co = 1 + static_cast<int>(rng.uniform_index(3));
        const int ks = rng.uniform_index(2) == 0 ? 1 : 3;
        auto x = rand_tensor({B, C, H, W}, rng);
        auto k = rand_tensor({Co, C, ks, ks}, rng);
        auto b = rand_tensor({Co}, rng);
        auto y = conv2d(x, k, b);
        auto ref = conv2d_oracle(x.data(), k.data(), b.data(), B, C, H, W, Co,
                                 ks);
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(std::abs(y.data()[i] - ref[i]) < 1e-6);
    }
}

TEST_CASE("conv2d: channel mismatch is a dimension error") {
    auto x = Tensor<double>::zeros({1, 2, 3, 3});
    auto k = Tensor<double>::zeros({1, 3, 3, 3});
    auto b = Tensor<double>::zeros({1});
    CHECK_THROWS_AS(conv2d(x, k, b), dimension_error);
}

TEST_CASE("conv2d: gradients match finite differences") {
    RngState rng(12);
    CHECK(suite_conv2d(rng, 6) < 1e-6);
}

TEST_CASE("layer_norm: constant vector normalizes to zero") {
    auto x = Tensor<double>::from_data({1, 3}, {1, 1, 1});
    auto g = Tensor<double>::filled({3}, 1.0);
    auto b = Tensor<double>::zeros({3});
    auto y = layer_norm(x, g, b);
    for (double v : y.data()) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("layer_norm: antisymmetric pair maps to -1,1") {
    for (double a : {0.5, 1.0, 7.0}) {
        auto x = Tensor<double>::from_data({1, 2}, {-a, a});
        auto g = Tensor<double>::filled({2}, 1.0);
        auto b = Tensor<double>::zeros({2});
        auto y = layer_norm(x, g, b);
        CHECK(y.data()[0] == doctest::Approx(-1.0).epsilon(1e-5));
        CHECK(y.data()[1] == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("layer_norm: gradients match finite differences") {
    RngState rng(13);
    CHECK(suite_layer_norm(rng, 8) < 1e-6);
}

TEST_CASE("softmax: symmetric input splits evenly and rows sum to one") {
    auto x = Tensor<double>::from_data({1, 2}, {0, 0});
    auto y = softmax_lastaxis(x);
    CHECK(y.data()[0] == doctest::Approx(0.5));
    CHECK(y.data()[1] == doctest::Approx(0.5));

    RngState rng(5);
    auto z = softmax_lastaxis(rand_tensor({4, 7}, rng, -3, 3));
    for (int r = 0; r < 4; ++r) {
        double s = 0;
        for (int j = 0; j < 7; ++j)
            s += z.data()[static_cast<std::size_t>(r * 7 + j)];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("gelu: zero maps to zero") {
    auto y = gelu(Tensor<double>::zeros({1}));
    CHECK(y.data()[0] == doctest::Approx(0.0));
}

TEST_CASE("softmax and gelu gradients match finite differences") {
    RngState rng(14);
    CHECK(suite_softmax(rng, 8) < 1e-6);
    CHECK(suite_gelu(rng, 8) < 1e-6);
}

TEST_CASE("grad_check: constant function has zero gradients") {
    RngState rng(6);
    auto x = rand_tensor({3}, rng);
    auto rep = grad_check({x}, [&] {
        auto c = Tensor<double>::filled({1}, 5.0);
        // x participates with weight zero
        return add(c, dot_const(x, {0.0, 0.0, 0.0}));
    });
    CHECK(rep.pass);
    CHECK(rep.max_rel_err == doctest::Approx(0.0));
}

TEST_CASE("grad_check: reports non-finite intermediates") {
    auto x = Tensor<double>::from_data({1}, {1.0});
    auto rep = grad_check({x}, [&] {
        return affine(x, std::numeric_limits<double>::infinity(), 0.0);
    });
    CHECK_FALSE(rep.pass);
    CHECK(rep.failure.find("non-finite") != std::string::npos);
}

TEST_CASE("determinism: identical inputs give bit-identical results") {
    for (int run = 0; run < 2; ++run) {
        RngState rng(99);
        auto x = rand_tensor({3, 5}, rng);
        auto w = rand_tensor({5, 4}, rng);
        auto b = rand_tensor({4}, rng);
        auto y = linear(gelu(x), w, b);
        static std::vector<double> first;
        if (run == 0)
            first = y.data();
        else
            CHECK(first == y.data());
    }
}

TEST_SUITE_END();
