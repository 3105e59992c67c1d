#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "relucegar/nnet_io.hpp"

using namespace relucegar;
using namespace testutil;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("evaluate reproduces the hand-computed fixture values") {
    const Network net = fig3_network();
    Eigen::VectorXd x(1);
    x << 1.0;
    CHECK(evaluate(net, x)(0) == doctest::Approx(7.0).epsilon(1e-12));
    const auto layers = evaluate_layers(net, x);
    CHECK(layers[2](0) == doctest::Approx(4.0));  // v3
    CHECK(layers[2](1) == doctest::Approx(3.0));  // v4
}

TEST_CASE("evaluate of an all-zero network is zero") {
    const Network net = make_network(
        2, {{{{0, 0}, {0, 0}}, {0, 0}, Activation::ReLU, {}},
            {{{0, 0}}, {0}, Activation::Identity, {}}});
    Rng rng(7);
    for (int i = 0; i < 10; ++i) {
        Eigen::VectorXd x(2);
        x << rng.uniform(-5, 5), rng.uniform(-5, 5);
        CHECK(evaluate(net, x)(0) == 0.0);
    }
}

TEST_CASE("evaluate agrees with an independently coded naive evaluator") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const Network net = random_network(rng, 2, 6);
        for (int i = 0; i < 100; ++i) {
            std::vector<double> x(net.input_dim);
            Eigen::VectorXd xe(net.input_dim);
            for (int d = 0; d < net.input_dim; ++d) {
                x[d] = rng.uniform(-3, 3);
                xe(d) = x[d];
            }
            const double got = evaluate(net, xe)(0);
            const double want = naive_evaluate(net, x)[0];
            CHECK(got == doctest::Approx(want).epsilon(1e-9));
        }
    }
}

TEST_CASE("evaluate is deterministic bit for bit") {
    Rng rng(13);
    const Network net = random_network(rng);
    const InputBox box = unit_box(net.input_dim);
    for (int i = 0; i < 20; ++i) {
        const Eigen::VectorXd x = random_point(rng, box);
        CHECK(evaluate(net, x) == evaluate(net, x));
    }
}

TEST_CASE("evaluate rejects dimension mismatches") {
    const Network net = fig3_network();
    Eigen::VectorXd x(2);
    x << 1, 2;
    CHECK_THROWS_AS(evaluate(net, x), std::invalid_argument);
}

TEST_CASE("minimal 1-1-1 NNet fixture parses") {
    const auto path = temp_file("minimal.nnet");
    std::ofstream out(path);
    out << "// minimal\n"
        << "2,1,1,1,\n"
        << "1,1,1,\n"
        << "0,\n"
        << "-1.0,\n"
        << "1.0,\n"
        << "0.0,0.0,\n"
        << "1.0,1.0,\n"
        << "2.0,\n"   // hidden weight
        << "0.5,\n"   // hidden bias
        << "3.0,\n"   // output weight
        << "-1.0,\n"; // output bias
    out.close();

    const Network net = load_nnet(path.string());
    CHECK(net.input_dim == 1);
    CHECK(net.num_layers() == 2);
    CHECK(net.hidden_count() == 1);
    CHECK(net.layers[0].weights(0, 0) == 2.0);
    CHECK(net.layers[0].biases(0) == 0.5);
    CHECK(net.layers[1].weights(0, 0) == 3.0);
    Eigen::VectorXd x(1);
    x << 2.0;
    CHECK(evaluate(net, x)(0) == doctest::Approx(3.0 * (2.0 * 2.0 + 0.5) - 1.0));
}

TEST_CASE("ACAS-architecture file loads with the expected shape") {
    // 5 inputs, 6 hidden layers of 50, 5 outputs: 300 hidden neurons.
    Rng rng(17);
    std::vector<LayerSpec> specs;
    std::vector<int> dims{5, 50, 50, 50, 50, 50, 50, 5};
    for (size_t l = 1; l < dims.size(); ++l) {
        LayerSpec spec;
        spec.activation = l + 1 == dims.size() ? Activation::Identity : Activation::ReLU;
        for (int r = 0; r < dims[l]; ++r) {
            std::vector<double> row;
            for (int c = 0; c < dims[l - 1]; ++c)
                row.push_back(rng.uniform(-1, 1));
            spec.weights.push_back(row);
            spec.biases.push_back(rng.uniform(-0.5, 0.5));
        }
        specs.push_back(spec);
    }
    Network acas = make_network(5, specs, "acas_like");
    const auto path = temp_file("acas_like.nnet");
    save_nnet(acas, path.string());
    const Network loaded = load_nnet(path.string());
    CHECK(loaded.input_dim == 5);
    CHECK(loaded.num_layers() == 7);
    CHECK(loaded.output_dim() == 5);
    CHECK(loaded.hidden_count() == 300);
}

TEST_CASE("NNet round trip is identical in parsed values") {
    Rng rng(19);
    for (int trial = 0; trial < 5; ++trial) {
        const Network net = random_network(rng, 3, 6, 4, rng.uniform_int(1, 3));
        const auto p1 = temp_file("roundtrip1.nnet");
        const auto p2 = temp_file("roundtrip2.nnet");
        save_nnet(net, p1.string());
        const Network a = load_nnet(p1.string());
        save_nnet(a, p2.string());
        const Network b = load_nnet(p2.string());
        CHECK(weights_identical(a, b));
        REQUIRE(a.normalization.has_value());
        REQUIRE(b.normalization.has_value());
        CHECK(a.normalization->mean == b.normalization->mean);
        CHECK(a.normalization->range == b.normalization->range);
    }
}

TEST_CASE("NNet parse errors carry line numbers") {
    SUBCASE("malformed header") {
        const auto path = temp_file("bad_header.nnet");
        std::ofstream(path) << "// c\n2,1,\n";
        try {
            load_nnet(path.string());
            FAIL("expected NnetParseError");
        } catch (const NnetParseError& e) {
            CHECK(std::string(e.what()).find(":2:") != std::string::npos);
        }
    }
    SUBCASE("row length mismatch") {
        const auto path = temp_file("bad_row.nnet");
        std::ofstream(path) << "2,1,1,1,\n1,1,1,\n0,\n-1,\n1,\n0,0,\n1,1,\n"
                            << "2.0,3.0,\n";  // row should have 1 entry
        try {
            load_nnet(path.string());
            FAIL("expected NnetParseError");
        } catch (const NnetParseError& e) {
            CHECK(std::string(e.what()).find(":8:") != std::string::npos);
        }
    }
    SUBCASE("non-numeric token") {
        const auto path = temp_file("bad_token.nnet");
        std::ofstream(path) << "2,1,1,1,\n1,1,1,\n0,\n-1,\n1,\n0,0,\n1,1,\n"
                            << "abc,\n";
        try {
            load_nnet(path.string());
            FAIL("expected NnetParseError");
        } catch (const NnetParseError& e) {
            const std::string msg = e.what();
            CHECK(msg.find(":8:") != std::string::npos);
            CHECK(msg.find("abc") != std::string::npos);
        }
    }
}

TEST_CASE("encode_robustness produces one single-output problem per adversarial class") {
    Rng rng(23);
    const Network net = random_network(rng, 2, 5, 3, 10);
    const InputBox box = unit_box(net.input_dim);
    const Eigen::VectorXd x0 = random_point(rng, box);
    Eigen::VectorXd scores = evaluate(net, x0);
    int target = 0;
    for (int i = 1; i < scores.size(); ++i)
        if (scores(i) > scores(target))
            target = i;

    const auto problems = encode_robustness(net, x0, 0.1, target);
    CHECK(problems.size() == 9);
    for (const auto& p : problems)
        CHECK(p.network.output_dim() == 1);

    // Difference-network semantics: M_a(x) = out_a(x) - out_target(x).
    int a = 0;
    for (const auto& p : problems) {
        if (a == target)
            ++a;
        for (int i = 0; i < 20; ++i) {
            const Eigen::VectorXd x = random_point(rng, p.box);
            const Eigen::VectorXd full = evaluate(net, x);
            CHECK(evaluate(p.network, x)(0) ==
                  doctest::Approx(full(a) - full(target)).epsilon(1e-9));
        }
        ++a;
    }
}

TEST_CASE("encode_robustness with delta zero degenerates to the point") {
    Rng rng(29);
    const Network net = random_network(rng, 2, 5, 3, 4);
    const Eigen::VectorXd x0 = random_point(rng, unit_box(net.input_dim));
    Eigen::VectorXd scores = evaluate(net, x0);
    int target = 0;
    for (int i = 1; i < scores.size(); ++i)
        if (scores(i) > scores(target))
            target = i;
    const auto problems = encode_robustness(net, x0, 0.0, target);
    for (const auto& p : problems) {
        CHECK(p.box.low == p.box.high);
        CHECK(p.box.low == x0);
        // All problems hold iff the margin at x0 is positive; with target the
        // argmax every difference is <= 0.
        CHECK(evaluate(p.network, x0)(0) <= 0.0);
    }
    CHECK_THROWS_AS(encode_robustness(net, x0, 0.1, 99), std::invalid_argument);
}

TEST_CASE("property JSON round trip") {
    Rng rng(31);
    const Network net = random_network(rng, 2, 4, 3, 1);
    VerificationProblem p;
    p.network = net;
    p.box = unit_box(net.input_dim, -0.5, 1.5);
    Halfspace h;
    h.a = Eigen::VectorXd::Ones(net.input_dim);
    h.b = 1.0;
    p.halfspaces.push_back(h);
    p.threshold = 2.5;

    const auto path = temp_file("prop.json");
    save_property(p, path.string());
    const VerificationProblem q = load_problem(net, path.string());
    CHECK(q.box.low == p.box.low);
    CHECK(q.box.high == p.box.high);
    REQUIRE(q.halfspaces.size() == 1);
    CHECK(q.halfspaces[0].a == h.a);
    CHECK(q.halfspaces[0].b == h.b);
    CHECK(q.threshold == p.threshold);

    std::ofstream(path) << "{ not json";
    CHECK_THROWS(load_problem(net, path.string()));
}
