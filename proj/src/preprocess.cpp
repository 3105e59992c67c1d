#include "relucegar/preprocess.hpp"

#include <stdexcept>

#include "relucegar/matrix_util.hpp"

namespace relucegar {

namespace {

NeuronId max_id(const Network& net) {
    NeuronId m = -1;
    for (const auto& meta : net.inputs)
        m = std::max(m, meta.id);
    for (const auto& layer : net.layers)
        for (const auto& meta : layer.neurons)
            m = std::max(m, meta.id);
    return m;
}

double sign_of(Label label) {
    if (label == Label::Inc)
        return 1.0;
    if (label == Label::Dec)
        return -1.0;
    throw std::runtime_error("successor neuron is unlabeled");
}

}  // namespace

Network split_layer(const Network& net, int layer_index) {
    if (layer_index < 0 || layer_index + 1 >= net.num_layers())
        throw std::invalid_argument("split_layer: not a hidden layer");

    Network out = net;
    const Layer& old_layer = net.layers[layer_index];
    const Layer& succ = net.layers[layer_index + 1];
    const int n = old_layer.size();
    const int succ_n = succ.size();

    Layer fresh;
    fresh.activation = Activation::ReLU;
    fresh.weights.resize(2 * n, old_layer.weights.cols());
    fresh.biases.resize(2 * n);
    fresh.neurons.reserve(2 * n);
    Eigen::MatrixXd succ_w(succ_n, 2 * n);

    NeuronId next = max_id(net) + 1;
    for (int r = 0; r < n; ++r) {
        fresh.weights.row(2 * r) = old_layer.weights.row(r);
        fresh.weights.row(2 * r + 1) = old_layer.weights.row(r);
        fresh.biases(2 * r) = old_layer.biases(r);
        fresh.biases(2 * r + 1) = old_layer.biases(r);
        for (int q = 0; q < succ_n; ++q) {
            const double w = succ.weights(q, r);
            const double s = sign_of(succ.neurons[q].label);
            succ_w(q, 2 * r) = (w * s > 0) ? w : 0.0;
            succ_w(q, 2 * r + 1) = (w * s < 0) ? w : 0.0;
        }
        fresh.neurons.push_back(make_neuron(next++, Label::Inc));
        fresh.neurons.push_back(make_neuron(next++, Label::Dec));
    }

    out.layers[layer_index] = std::move(fresh);
    out.layers[layer_index + 1].weights = std::move(succ_w);
    return out;
}

Network preprocess(const Network& net, bool prune) {
    net.validate();
    if (net.output_dim() != 1)
        throw std::invalid_argument("preprocess requires a single output neuron");

    Network out = net;
    out.layers.back().neurons[0].label = Label::Inc;
    for (int i = out.num_layers() - 2; i >= 0; --i)
        out = split_layer(out, i);

    // No outgoing edges at all: labeled Inc by convention.
    for (int i = 0; i + 1 < out.num_layers(); ++i) {
        Layer& layer = out.layers[i];
        const Eigen::MatrixXd& succ_w = out.layers[i + 1].weights;
        for (int r = 0; r < layer.size(); ++r)
            if (succ_w.col(r).isZero(0.0))
                layer.neurons[r].label = Label::Inc;
    }

    if (prune)
        out = prune_dead(out);
    assign_ids(out);
    out.name = net.name + "#pre";
    out.validate();
    return out;
}

Network prune_dead(const Network& net) {
    Network out = net;
    // A removal at layer i can zero out a column of layer i, so sweep back to front.
    for (int i = out.num_layers() - 2; i >= 0; --i) {
        Layer& layer = out.layers[i];
        Layer& succ = out.layers[i + 1];
        for (int r = layer.size() - 1; r >= 0; --r) {
            if (!succ.weights.col(r).isZero(0.0))
                continue;
            layer.weights = remove_row(layer.weights, r);
            layer.biases = remove_entry(layer.biases, r);
            layer.neurons.erase(layer.neurons.begin() + r);
            succ.weights = remove_col(succ.weights, r);
        }
    }
    return out;
}

}  // namespace relucegar
