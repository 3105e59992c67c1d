#pragma once

#include <unordered_map>

#include "relucegar/network.hpp"
#include "relucegar/problem.hpp"

namespace relucegar {

// Sound per-neuron bounds over an input box. `post` bounds are post-activation
// (the values used for freezing and value estimates); `pre` bounds are kept for
// ReLU stability detection.
struct BoundsTable {
    std::unordered_map<NeuronId, Interval> post;
    std::unordered_map<NeuronId, Interval> pre;
    std::string reference;  // network the table was computed on

    bool has(NeuronId id) const { return post.count(id) != 0; }
    const Interval& post_at(NeuronId id) const;
    const Interval& pre_at(NeuronId id) const;
};

// Plain interval arithmetic, layer by layer.
BoundsTable interval_bounds(const Network& net, const InputBox& box);

// Affine lower/upper forms in the inputs, concretized at each unstable ReLU:
// triangle relaxation for the upper form, zero/identity for the lower form.
// Tighter than interval_bounds on cancelling expressions; the default source.
BoundsTable symbolic_bounds(const Network& net, const InputBox& box);

// Writes post-activation bounds into each neuron's metadata.
void annotate_bounds(Network& net, const BoundsTable& table);

}  // namespace relucegar
