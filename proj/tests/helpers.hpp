#pragma once

#include <random>
#include <vector>

#include "relucegar/abstraction.hpp"
#include "relucegar/bounds.hpp"
#include "relucegar/network.hpp"
#include "relucegar/preprocess.hpp"
#include "relucegar/problem.hpp"

namespace testutil {

using namespace relucegar;

struct LayerSpec {
    std::vector<std::vector<double>> weights;  // rows
    std::vector<double> biases;
    Activation activation = Activation::ReLU;
    std::vector<Label> labels;  // optional; defaults to None
};

inline Network make_network(int input_dim, const std::vector<LayerSpec>& specs,
                            const std::string& name = "fixture") {
    Network net;
    net.input_dim = input_dim;
    net.inputs.resize(input_dim);
    net.name = name;
    for (const auto& spec : specs) {
        Layer layer;
        const int rows = static_cast<int>(spec.weights.size());
        const int cols = rows > 0 ? static_cast<int>(spec.weights[0].size()) : 0;
        layer.weights.resize(rows, cols);
        layer.biases.resize(rows);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c)
                layer.weights(r, c) = spec.weights[r][c];
            layer.biases(r) = spec.biases[r];
        }
        layer.activation = spec.activation;
        layer.neurons.resize(rows);
        for (int r = 0; r < rows; ++r)
            if (r < static_cast<int>(spec.labels.size()))
                layer.neurons[r].label = spec.labels[r];
        net.layers.push_back(std::move(layer));
    }
    assign_ids(net);
    net.validate();
    return net;
}

// Figure fixture: x1 -> v1, v2 (weights 1, 1); v3 = 3 v1 + 1 v2; v4 = 1 v1 + 2 v2;
// y = v3 + v4. Zero biases, every hidden neuron Inc. Ids: x1=0 v1=1 v2=2 v3=3 v4=4 y=5.
inline Network fig3_network() {
    return make_network(
        1,
        {{{{1}, {1}}, {0, 0}, Activation::ReLU, {Label::Inc, Label::Inc}},
         {{{3, 1}, {1, 2}}, {0, 0}, Activation::ReLU, {Label::Inc, Label::Inc}},
         {{{1, 1}}, {0}, Activation::Identity, {}}},
        "fig3");
}

// Figure fixture: v1 (incoming 1,2; bias 1), v2 (4,-1; bias 2), v3 (-3,-2; bias 0),
// y = 2 v1 + v2 + v3. All hidden Inc. Ids: x1=0 x2=1 v1=2 v2=3 v3=4 y=5.
inline Network fig2_network() {
    return make_network(
        2,
        {{{{1, 2}, {4, -1}, {-3, -2}},
          {1, 2, 0},
          Activation::ReLU,
          {Label::Inc, Label::Inc, Label::Inc}},
         {{{2, 1, 1}}, {0}, Activation::Identity, {}}},
        "fig2");
}

// Figure fixture for the preprocessing golden test: second hidden layer already
// split and labeled (Inc, Dec, Inc), first layer unlabeled. v11 has bias -1,
// incoming (4, 2) and outgoing (2, 4, -1).
inline Network fig1_network() {
    return make_network(
        2,
        {{{{4, 2}, {1, 1}}, {-1, 0}, Activation::ReLU, {}},
         {{{2, 1}, {4, -1}, {-1, 2}},
          {0, 0, 0},
          Activation::ReLU,
          {Label::Inc, Label::Dec, Label::Inc}},
         {{{2, -1, 3}}, {0}, Activation::Identity, {}}},
        "fig1");
}

// Independent reference evaluator: plain loops, no shared code with
// Network::evaluate's Eigen path.
inline std::vector<double> naive_evaluate(const Network& net, const std::vector<double>& x) {
    std::vector<double> v = x;
    for (int l = 0; l < net.num_layers(); ++l) {
        const Layer& layer = net.layers[l];
        std::vector<double> next(layer.size(), 0.0);
        for (int r = 0; r < layer.size(); ++r) {
            double acc = layer.biases(r);
            for (size_t c = 0; c < v.size(); ++c)
                acc += layer.weights(r, static_cast<int>(c)) * v[c];
            if (layer.activation == Activation::ReLU && acc < 0)
                acc = 0;
            next[r] = acc;
        }
        v = std::move(next);
    }
    return v;
}

// Propagates forward from fixed post-activation values of layer `layer_index`.
inline double evaluate_from_layer(const Network& net, int layer_index,
                                  const Eigen::VectorXd& values) {
    Eigen::VectorXd v = values;
    for (int l = layer_index + 1; l < net.num_layers(); ++l) {
        const Layer& layer = net.layers[l];
        v = layer.weights * v + layer.biases;
        if (layer.activation == Activation::ReLU)
            v = v.cwiseMax(0.0);
    }
    return v(0);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) {
        const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    }
    int uniform_int(int lo, int hi) {  // inclusive
        return lo + static_cast<int>(rng_() % static_cast<std::uint64_t>(hi - lo + 1));
    }
    std::uint64_t raw() { return rng_(); }

private:
    std::mt19937_64 rng_;
};

inline Network random_network(Rng& rng, int max_hidden_layers = 3, int max_width = 8,
                              int max_inputs = 3, int outputs = 1) {
    const int inputs = rng.uniform_int(1, max_inputs);
    const int hidden_layers = rng.uniform_int(1, max_hidden_layers);
    std::vector<int> dims{inputs};
    for (int i = 0; i < hidden_layers; ++i)
        dims.push_back(rng.uniform_int(1, max_width));
    dims.push_back(outputs);

    std::vector<LayerSpec> specs;
    for (size_t l = 1; l < dims.size(); ++l) {
        LayerSpec spec;
        spec.activation = (l + 1 == dims.size()) ? Activation::Identity : Activation::ReLU;
        for (int r = 0; r < dims[l]; ++r) {
            std::vector<double> row;
            for (int c = 0; c < dims[l - 1]; ++c)
                row.push_back(rng.uniform(-2, 2));
            spec.weights.push_back(row);
            spec.biases.push_back(rng.uniform(-1, 1));
        }
        specs.push_back(spec);
    }
    return make_network(inputs, specs, "random");
}

inline InputBox unit_box(int dim, double lo = -1.0, double hi = 1.0) {
    InputBox box;
    box.low = Eigen::VectorXd::Constant(dim, lo);
    box.high = Eigen::VectorXd::Constant(dim, hi);
    return box;
}

inline Eigen::VectorXd random_point(Rng& rng, const InputBox& box) {
    Eigen::VectorXd x(box.dim());
    for (int i = 0; i < box.dim(); ++i)
        x(i) = rng.uniform(box.low(i), box.high(i));
    return x;
}

struct LegalStep {
    bool is_merge;
    int layer;
    NeuronId a, b;  // merge operands or (target, unused)
};

inline std::vector<LegalStep> legal_steps(const AbstractionState& state,
                                          const BoundsTable& table) {
    std::vector<LegalStep> out;
    const Network& net = state.current;
    bool box_nonneg = true;
    for (const auto& m : net.inputs)
        if (state.derived.at(m.id).lb < 0)
            box_nonneg = false;
    for (int l = 0; l + 1 < net.num_layers(); ++l) {
        const Layer& layer = net.layers[l];
        for (int i = 0; i < layer.size(); ++i) {
            const NeuronMeta& a = layer.neurons[i];
            if (a.kind == NeuronKind::Constant)
                continue;
            if (a.kind == NeuronKind::Atomic && table.has(a.id))
                out.push_back({false, l, a.id, -1});
            if (l == 0 && !box_nonneg)
                continue;  // first-layer merges need a nonnegative box
            for (int j = i + 1; j < layer.size(); ++j) {
                const NeuronMeta& b = layer.neurons[j];
                if (b.kind == NeuronKind::Constant || b.label != a.label)
                    continue;
                out.push_back({true, l, a.id, b.id});
            }
        }
    }
    return out;
}

// Applies up to `steps` uniformly chosen legal abstraction steps.
inline void random_abstraction(AbstractionState& state, const BoundsTable& table, Rng& rng,
                               int steps) {
    for (int s = 0; s < steps; ++s) {
        auto candidates = legal_steps(state, table);
        if (candidates.empty())
            return;
        const LegalStep& pick = candidates[rng.uniform_int(0, candidates.size() - 1)];
        if (pick.is_merge)
            merge(state, pick.layer, pick.a, pick.b);
        else
            qfreeze(state, pick.a, table);
    }
}

}  // namespace testutil
