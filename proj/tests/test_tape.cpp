#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "macvae/tape.hpp"
#include "test_util.hpp"

using namespace macvae;

TEST_CASE("gradient of half squared norm is the parameter itself") {
    ParameterStore store;
    store.add("w", 2, 3);
    Rng rng(1);
    testutil::randomize(store, rng);
    loss_and_grad(
        [&](Tape& t) {
            Tape::Id w = t.param(store, "w");
            Tape::Id s = t.sq_norm_diff(w, Vec(6, 0.0));
            return t.weighted_sum({s}, {0.5});
        },
        store);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(store.grad("w")[i] == doctest::Approx(store.value("w")[i]).epsilon(1e-14));
}

TEST_CASE("constant loss has zero gradients") {
    ParameterStore store;
    store.add("w", 2, 2);
    Rng rng(2);
    testutil::randomize(store, rng);
    loss_and_grad([&](Tape& t) { return t.constant({3.5}); }, store);
    for (double g : store.grad("w")) CHECK(g == 0.0);
}

TEST_CASE("finite differences across the whole op set") {
    // One composite touching every differentiable op, checked on many random
    // parameter draws.
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ParameterStore store;
        store.add("w", 3, 3);
        store.add("b", 3, 1);
        store.add("u", 3, 1);
        store.add("lv", 3, 1);
        store.add("s", 1, 1);
        Rng rng(100 + seed);
        testutil::randomize(store, rng);
        Vec x = rng.normal_vec(3);
        Vec noise = rng.normal_vec(3);
        Vec weights = {1.0, 0.0, 2.0};
        Vec target = rng.normal_vec(3);

        auto loss = [&]() {
            return loss_and_grad(
                [&](Tape& t) {
                    Tape::Id w = t.param(store, "w");
                    Tape::Id b = t.param(store, "b");
                    Tape::Id u = t.param(store, "u");
                    Tape::Id lv = t.param(store, "lv");
                    Tape::Id s = t.param(store, "s");
                    Tape::Id in = t.constant(x);
                    Tape::Id h = t.activation(t.affine(w, b, in, 3, 3), Activation::Tanh);
                    Tape::Id mu = t.mean_of({h, u});
                    Tape::Id kl = t.gaussian_kl(mu, lv);
                    Tape::Id z = t.reparameterize(mu, lv, noise);
                    Tape::Id zc = t.clamp(z, -3.0, 3.0);
                    Tape::Id lp = t.softmax_log(zc);
                    Tape::Id nll = t.weighted_nll(lp, weights);
                    Tape::Id d = t.dot(z, u);
                    Tape::Id ls = t.log_sigmoid(d);
                    Tape::Id sq = t.sq_norm_diff(t.sub(h, u), target);
                    Tape::Id relu = t.activation(t.concat(h, u), Activation::Relu);
                    Tape::Id sig = t.activation(relu, Activation::Sigmoid);
                    Tape::Id extra = t.dot(sig, sig);
                    Tape::Id s2 = t.dot(s, s);
                    return t.weighted_sum({kl, nll, ls, sq, extra, s2},
                                          {1.0, 0.5, -1.0, 0.25, 0.1, 2.0});
                },
                store);
        };
        double err = testutil::max_fd_rel_err(store, loss);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("clamp blocks gradient outside the interval") {
    ParameterStore store;
    store.add("w", 1, 1);
    store.value("w")[0] = 5.0;
    loss_and_grad(
        [&](Tape& t) {
            Tape::Id w = t.param(store, "w");
            Tape::Id c = t.clamp(w, -1.0, 1.0);
            return t.dot(c, c);
        },
        store);
    CHECK(store.grad("w")[0] == 0.0);
}

TEST_CASE("non-finite loss raises a numerical error naming the op") {
    ParameterStore store;
    store.add("w", 1, 1);
    store.value("w")[0] = 1e308;
    bool threw = false;
    try {
        loss_and_grad(
            [&](Tape& t) {
                Tape::Id w = t.param(store, "w");
                return t.dot(w, w);  // overflows to inf
            },
            store);
    } catch (const NumericalError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("dot") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("param nodes are cached per tape") {
    ParameterStore store;
    store.add("w", 1, 1);
    store.value("w")[0] = 2.0;
    loss_and_grad(
        [&](Tape& t) {
            Tape::Id a = t.param(store, "w");
            Tape::Id b = t.param(store, "w");
            CHECK(a == b);
            return t.dot(a, b);  // w^2, gradient 2w = 4
        },
        store);
    CHECK(store.grad("w")[0] == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("tape mlp matches the plain forward pass") {
    ParameterStore store;
    MLPSpec spec{{3, 4, 2}, Activation::Tanh, OutputHeads::MeanAndLogvar};
    register_mlp(store, "g", spec);
    Rng rng(7);
    testutil::randomize(store, rng);
    Vec x = rng.normal_vec(3);
    GaussianParams plain = mlp_gaussian(x, spec, store, "g");
    Tape t;
    auto [mu, lv] = tape_mlp_gaussian(t, t.constant(x), spec, store, "g");
    for (int k = 0; k < 2; ++k) {
        CHECK(t.value(mu)[static_cast<std::size_t>(k)] ==
              doctest::Approx(plain.mean[static_cast<std::size_t>(k)]).epsilon(1e-14));
    }
    (void)lv;
}
