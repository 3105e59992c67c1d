#include "relucegar/network.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

namespace relucegar {

int Network::hidden_count() const {
    int n = 0;
    for (int i = 0; i + 1 < num_layers(); ++i)
        n += layers[i].size();
    return n;
}

NeuronId Network::output_id() const {
    if (output_dim() != 1)
        throw std::runtime_error("network does not have a single output neuron");
    return layers.back().neurons[0].id;
}

void Network::validate() const {
    if (layers.empty())
        throw std::runtime_error("network has no layers");
    if (static_cast<int>(inputs.size()) != input_dim)
        throw std::runtime_error("input metadata size does not match input_dim");

    int prev = input_dim;
    std::set<NeuronId> seen;
    for (const auto& m : inputs) {
        if (!seen.insert(m.id).second)
            throw std::runtime_error("duplicate neuron id");
    }
    for (int i = 0; i < num_layers(); ++i) {
        const Layer& layer = layers[i];
        if (layer.weights.cols() != prev) {
            std::ostringstream os;
            os << "layer " << i << ": weight matrix has " << layer.weights.cols()
               << " columns, expected " << prev;
            throw std::runtime_error(os.str());
        }
        if (layer.weights.rows() != layer.biases.size() ||
            layer.weights.rows() != static_cast<int>(layer.neurons.size()))
            throw std::runtime_error("layer rows, biases and neuron metadata disagree");
        const bool last = (i + 1 == num_layers());
        if (last && layer.activation != Activation::Identity)
            throw std::runtime_error("output layer must have identity activation");
        if (!last && layer.activation != Activation::ReLU)
            throw std::runtime_error("hidden layers must have ReLU activation");
        NeuronId prev_id = -1;
        bool first = true;
        for (const auto& m : layer.neurons) {
            if (!seen.insert(m.id).second)
                throw std::runtime_error("duplicate neuron id");
            if (!first && m.id <= prev_id)
                throw std::runtime_error("layer neurons not in ascending id order");
            prev_id = m.id;
            first = false;
        }
        prev = layer.size();
    }
}

Eigen::VectorXd evaluate(const Network& net, const Eigen::VectorXd& x) {
    if (x.size() != net.input_dim)
        throw std::invalid_argument("evaluate: input dimension mismatch");
    Eigen::VectorXd v = x;
    for (int i = 0; i < net.num_layers(); ++i) {
        const Layer& layer = net.layers[i];
        v = layer.weights * v + layer.biases;
        if (layer.activation == Activation::ReLU)
            v = v.cwiseMax(0.0);
    }
    return v;
}

std::vector<Eigen::VectorXd> evaluate_layers(const Network& net, const Eigen::VectorXd& x) {
    if (x.size() != net.input_dim)
        throw std::invalid_argument("evaluate_layers: input dimension mismatch");
    std::vector<Eigen::VectorXd> out;
    out.reserve(net.num_layers() + 1);
    out.push_back(x);
    Eigen::VectorXd v = x;
    for (int i = 0; i < net.num_layers(); ++i) {
        const Layer& layer = net.layers[i];
        v = layer.weights * v + layer.biases;
        if (layer.activation == Activation::ReLU)
            v = v.cwiseMax(0.0);
        out.push_back(v);
    }
    return out;
}

NeuronRef locate(const Network& net, NeuronId id) {
    for (int i = 0; i < net.input_dim; ++i)
        if (net.inputs[i].id == id)
            return {-1, i};
    for (int l = 0; l < net.num_layers(); ++l)
        for (int i = 0; i < net.layers[l].size(); ++i)
            if (net.layers[l].neurons[i].id == id)
                return {l, i};
    std::ostringstream os;
    os << "neuron id " << id << " not found";
    throw std::runtime_error(os.str());
}

const NeuronMeta& meta_at(const Network& net, const NeuronRef& ref) {
    return ref.layer < 0 ? net.inputs[ref.index] : net.layers[ref.layer].neurons[ref.index];
}

NeuronMeta& meta_at(Network& net, const NeuronRef& ref) {
    return ref.layer < 0 ? net.inputs[ref.index] : net.layers[ref.layer].neurons[ref.index];
}

void assign_ids(Network& net) {
    NeuronId next = 0;
    for (auto& m : net.inputs)
        m.id = next++;
    for (auto& layer : net.layers)
        for (auto& m : layer.neurons)
            m.id = next++;
}

bool weights_identical(const Network& a, const Network& b) {
    if (a.input_dim != b.input_dim || a.num_layers() != b.num_layers())
        return false;
    for (int l = 0; l < a.num_layers(); ++l) {
        const Layer& la = a.layers[l];
        const Layer& lb = b.layers[l];
        if (la.size() != lb.size() || la.weights.cols() != lb.weights.cols())
            return false;
        if (la.weights != lb.weights || la.biases != lb.biases)
            return false;
        for (int i = 0; i < la.size(); ++i)
            if (la.neurons[i].id != lb.neurons[i].id)
                return false;
    }
    return true;
}

NeuronMeta make_neuron(NeuronId id, Label label, NeuronKind kind, int origin) {
    NeuronMeta m;
    m.id = id;
    m.label = label;
    m.kind = kind;
    m.origin = origin;
    return m;
}

}  // namespace relucegar
