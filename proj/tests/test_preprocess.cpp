#include <doctest.h>

#include "helpers.hpp"

using namespace relucegar;
using namespace testutil;

TEST_CASE("splitting reproduces the golden figure weights bitwise") {
    const Network net = fig1_network();
    const Network split = split_layer(net, 0);

    // v11 becomes an Inc copy and a Dec copy at rows 0 and 1.
    const Layer& layer = split.layers[0];
    REQUIRE(layer.size() == 4);
    CHECK(layer.neurons[0].label == Label::Inc);
    CHECK(layer.neurons[1].label == Label::Dec);

    CHECK(layer.biases(0) == -1.0);
    CHECK(layer.biases(1) == -1.0);
    CHECK(layer.weights(0, 0) == 4.0);
    CHECK(layer.weights(0, 1) == 2.0);
    CHECK(layer.weights(1, 0) == 4.0);
    CHECK(layer.weights(1, 1) == 2.0);

    // Outgoing: the Inc copy keeps only the weight-2 edge to the Inc successor;
    // the Dec copy keeps the weight-4 edge to the Dec successor and the
    // weight -1 edge to the Inc successor.
    const Eigen::MatrixXd& succ = split.layers[1].weights;
    CHECK(succ(0, 0) == 2.0);
    CHECK(succ(1, 0) == 0.0);
    CHECK(succ(2, 0) == 0.0);
    CHECK(succ(0, 1) == 0.0);
    CHECK(succ(1, 1) == 4.0);
    CHECK(succ(2, 1) == -1.0);
}

TEST_CASE("one-sided outgoing signs leave prunable Dec copies") {
    // All hidden-to-output weights positive and the output Inc: every Dec copy
    // has all-zero outgoing weights, so pruning restores the original count.
    const Network net = make_network(
        2, {{{{1, 2}, {-1, 3}, {2, -2}}, {0.5, -0.5, 0}, Activation::ReLU, {}},
            {{{1, 2, 3}}, {0}, Activation::Identity, {}}});

    const Network unpruned = preprocess(net, false);
    CHECK(unpruned.hidden_count() == 2 * net.hidden_count());
    const Network pruned = preprocess(net, true);
    CHECK(pruned.hidden_count() == net.hidden_count());

    Rng rng(5);
    const InputBox box = unit_box(2, -3, 3);
    for (int i = 0; i < 50; ++i) {
        const Eigen::VectorXd x = random_point(rng, box);
        const double want = evaluate(net, x)(0);
        CHECK(evaluate(unpruned, x)(0) == doctest::Approx(want).epsilon(1e-12));
        CHECK(evaluate(pruned, x)(0) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("preprocessing preserves the function and at most doubles the hidden size") {
    Rng rng(41);
    const InputBox sample_space = unit_box(4, -2, 2);
    for (int trial = 0; trial < 50; ++trial) {
        const Network net = random_network(rng, 3, 8, 4);
        const Network pre = preprocess(net);
        CHECK(pre.hidden_count() <= 2 * net.hidden_count());
        for (int l = 0; l + 1 < pre.num_layers(); ++l)
            for (const auto& m : pre.layers[l].neurons)
                CHECK(m.label != Label::None);
        for (int i = 0; i < 200; ++i) {
            Eigen::VectorXd x(net.input_dim);
            for (int d = 0; d < net.input_dim; ++d)
                x(d) = rng.uniform(sample_space.low(d), sample_space.high(d));
            const double want = evaluate(net, x)(0);
            const double got = evaluate(pre, x)(0);
            CHECK(std::abs(got - want) <= 1e-6 * (1 + std::abs(want)));
        }
    }
}

TEST_CASE("labels are sound: nudging a neuron moves the output monotonically") {
    Rng rng(43);
    const double eps = 1e-3;
    for (int trial = 0; trial < 10; ++trial) {
        const Network net = random_network(rng, 3, 6, 3);
        const Network pre = preprocess(net);
        const InputBox box = unit_box(pre.input_dim);
        for (int i = 0; i < 20; ++i) {
            const Eigen::VectorXd x = random_point(rng, box);
            const auto values = evaluate_layers(pre, x);
            for (int l = 0; l + 1 < pre.num_layers(); ++l) {
                const double base = evaluate_from_layer(pre, l, values[l + 1]);
                for (int r = 0; r < pre.layers[l].size(); ++r) {
                    Eigen::VectorXd bumped = values[l + 1];
                    bumped(r) += eps;
                    const double shifted = evaluate_from_layer(pre, l, bumped);
                    if (pre.layers[l].neurons[r].label == Label::Inc)
                        CHECK(shifted >= base - 1e-12);
                    else
                        CHECK(shifted <= base + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("prune_dead leaves networks without zero rows unchanged") {
    const Network net = fig2_network();
    const Network pruned = prune_dead(net);
    CHECK(weights_identical(net, pruned));
}

TEST_CASE("prune_dead preserves evaluation on random preprocessed networks") {
    Rng rng(47);
    for (int trial = 0; trial < 10; ++trial) {
        const Network net = random_network(rng, 3, 6, 3);
        const Network unpruned = preprocess(net, false);
        const Network pruned = prune_dead(unpruned);
        CHECK(pruned.hidden_count() <= unpruned.hidden_count());
        const InputBox box = unit_box(net.input_dim, -2, 2);
        for (int i = 0; i < 200; ++i) {
            const Eigen::VectorXd x = random_point(rng, box);
            CHECK(evaluate(pruned, x)(0) ==
                  doctest::Approx(evaluate(unpruned, x)(0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("preprocess rejects multi-output networks") {
    Rng rng(53);
    const Network net = random_network(rng, 2, 4, 3, 2);
    CHECK_THROWS_AS(preprocess(net), std::invalid_argument);
}
