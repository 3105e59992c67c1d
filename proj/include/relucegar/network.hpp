#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace relucegar {

using NeuronId = int;

enum class Activation { ReLU, Identity };
enum class Label { None, Inc, Dec };
enum class NeuronKind { Atomic, Abstract, Constant };

struct Interval {
    double lb = 0.0;
    double ub = 0.0;
};

struct NeuronMeta {
    NeuronId id = -1;
    Label label = Label::None;
    NeuronKind kind = NeuronKind::Atomic;
    // Abstract: id of the merge step that produced this neuron.
    // Constant: id of the atomic neuron that was frozen.
    int origin = -1;
    std::optional<Interval> bounds;  // post-activation, w.r.t. the bounds reference network
};

struct Layer {
    Eigen::MatrixXd weights;  // rows: this layer's neurons, cols: previous layer's neurons
    Eigen::VectorXd biases;
    Activation activation = Activation::ReLU;
    std::vector<NeuronMeta> neurons;

    int size() const { return static_cast<int>(neurons.size()); }
};

// Input scaling metadata from the NNet header. Loaded but only applied on request.
struct Normalization {
    Eigen::VectorXd input_min;
    Eigen::VectorXd input_max;
    Eigen::VectorXd mean;   // inputs + output
    Eigen::VectorXd range;  // inputs + output
};

struct NeuronRef {
    int layer;  // index into Network::layers; -1 denotes the input layer
    int index;  // row within that layer
};

class Network {
public:
    int input_dim = 0;
    std::vector<NeuronMeta> inputs;  // metadata for the input layer
    std::vector<Layer> layers;       // layers[0] is the first affine layer
    std::optional<Normalization> normalization;
    std::string name;

    int num_layers() const { return static_cast<int>(layers.size()); }
    int output_dim() const { return layers.empty() ? 0 : layers.back().size(); }

    // Hidden neurons: all layers except the last.
    int hidden_count() const;

    const Layer& output_layer() const { return layers.back(); }

    // Id of the unique output neuron; throws unless output_dim() == 1.
    NeuronId output_id() const;

    // Checks structural invariants: dimension chaining, activation placement,
    // unique ids, per-layer ascending id order. Throws std::runtime_error.
    void validate() const;
};

Eigen::VectorXd evaluate(const Network& net, const Eigen::VectorXd& x);

// Post-activation values of every layer; result[0] is x itself,
// result[i] the values of layers[i-1].
std::vector<Eigen::VectorXd> evaluate_layers(const Network& net, const Eigen::VectorXd& x);

// Locates a neuron by id (input or layer neuron). Throws if absent.
NeuronRef locate(const Network& net, NeuronId id);

const NeuronMeta& meta_at(const Network& net, const NeuronRef& ref);
NeuronMeta& meta_at(Network& net, const NeuronRef& ref);

// Assigns sequential ids: inputs first, then each layer front to back.
void assign_ids(Network& net);

// Exact equality of weights, biases, per-layer neuron ids and layer shapes.
bool weights_identical(const Network& a, const Network& b);

NeuronMeta make_neuron(NeuronId id, Label label = Label::None,
                       NeuronKind kind = NeuronKind::Atomic, int origin = -1);

}  // namespace relucegar
