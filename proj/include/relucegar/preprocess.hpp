#pragma once

#include "relucegar/network.hpp"

namespace relucegar {

// Splits every hidden neuron of layer `layer_index` into an Inc copy (keeping
// positive-weight edges to Inc successors and negative-weight edges to Dec
// successors) and a Dec copy (the complement). Successor labels must already
// be assigned. Incoming weights and biases are copied to both halves.
Network split_layer(const Network& net, int layer_index);

// Transforms a single-output network into an equivalent one in which every
// hidden neuron is labeled Inc or Dec, by splitting backwards layer by layer.
// Hidden size at most doubles. When `prune` is set, all-zero-outgoing neurons
// are removed afterwards.
Network preprocess(const Network& net, bool prune = true);

// Removes hidden neurons whose outgoing weights are all zero; the network
// function is unchanged.
Network prune_dead(const Network& net);

}  // namespace relucegar
