#include <doctest.h>

#include "support.hpp"

using namespace vpr;
using namespace vprtest;

namespace {

AttnParams<double> random_attn(index_t d, RngState& rng) {
    return AttnParams<double>{
        rand_tensor({d, d}, rng), rand_tensor({d}, rng),
        rand_tensor({d, d}, rng), rand_tensor({d}, rng),
        rand_tensor({d, d}, rng), rand_tensor({d}, rng),
        rand_tensor({d, d}, rng), rand_tensor({d}, rng)};
}

}  // namespace

TEST_SUITE_BEGIN("attention");

TEST_CASE("mhsa: a single token attends only to itself") {
    RngState rng(31);
    const index_t d = 6;
    auto x = rand_tensor({2, 1, d}, rng);
    auto p = random_attn(d, rng);
    auto y = mhsa(x, p, 2);
    // attention weight is exactly 1, so output == out_proj(v_proj(x))
    auto expected = linear(linear(x, p.wv, p.bv), p.wo, p.bo);
    for (std::size_t i = 0; i < y.data().size(); ++i)
        CHECK(y.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-9));
}

TEST_CASE("mhsa: permuting tokens permutes outputs identically") {
    RngState rng(32);
    const index_t T = 5, d = 8;
    auto x = rand_tensor({1, T, d}, rng);
    auto p = random_attn(d, rng);
    auto y = mhsa(x, p, 2);

    const std::vector<index_t> perm = {3, 0, 4, 1, 2};
    auto xp = Tensor<double>::zeros({1, T, d});
    for (index_t t = 0; t < T; ++t)
        for (index_t j = 0; j < d; ++j)
            xp.data()[static_cast<std::size_t>(t * d + j)] =
                x.data()[static_cast<std::size_t>(perm[static_cast<std::size_t>(t)] * d + j)];
    auto yp = mhsa(xp, p, 2);
    for (index_t t = 0; t < T; ++t)
        for (index_t j = 0; j < d; ++j)
            CHECK(yp.data()[static_cast<std::size_t>(t * d + j)] ==
                  doctest::Approx(
                      y.data()[static_cast<std::size_t>(
                          perm[static_cast<std::size_t>(t)] * d + j)])
                      .epsilon(1e-9));
}

TEST_CASE("mhsa: head count must divide the model dim") {
    RngState rng(33);
    auto x = rand_tensor({1, 2, 6}, rng);
    auto p = random_attn(6, rng);
    CHECK_THROWS_AS(mhsa(x, p, 4), config_error);
}

TEST_CASE("mhsa: gradients match finite differences") {
    RngState rng(34);
    CHECK(suite_mhsa(rng, 6) < 1e-5);
}

TEST_SUITE_END();
