#include "relucegar/bounds.hpp"

#include <sstream>
#include <stdexcept>

namespace relucegar {

namespace {

[[noreturn]] void missing(NeuronId id) {
    std::ostringstream os;
    os << "no bounds recorded for neuron " << id;
    throw std::runtime_error(os.str());
}

}  // namespace

const Interval& BoundsTable::post_at(NeuronId id) const {
    auto it = post.find(id);
    if (it == post.end())
        missing(id);
    return it->second;
}

const Interval& BoundsTable::pre_at(NeuronId id) const {
    auto it = pre.find(id);
    if (it == pre.end())
        missing(id);
    return it->second;
}

BoundsTable interval_bounds(const Network& net, const InputBox& box) {
    net.validate();
    if (box.dim() != net.input_dim)
        throw std::invalid_argument("interval_bounds: box dimension mismatch");

    BoundsTable table;
    table.reference = net.name;
    for (int i = 0; i < net.input_dim; ++i) {
        table.pre[net.inputs[i].id] = {box.low(i), box.high(i)};
        table.post[net.inputs[i].id] = {box.low(i), box.high(i)};
    }
    Eigen::VectorXd lo = box.low;
    Eigen::VectorXd hi = box.high;
    for (int l = 0; l < net.num_layers(); ++l) {
        const Layer& layer = net.layers[l];
        const Eigen::MatrixXd pos = layer.weights.cwiseMax(0.0);
        const Eigen::MatrixXd neg = layer.weights.cwiseMin(0.0);
        Eigen::VectorXd pre_lo = pos * lo + neg * hi + layer.biases;
        Eigen::VectorXd pre_hi = pos * hi + neg * lo + layer.biases;
        Eigen::VectorXd post_lo = pre_lo;
        Eigen::VectorXd post_hi = pre_hi;
        if (layer.activation == Activation::ReLU) {
            post_lo = post_lo.cwiseMax(0.0);
            post_hi = post_hi.cwiseMax(0.0);
        }
        for (int r = 0; r < layer.size(); ++r) {
            const NeuronId id = layer.neurons[r].id;
            table.pre[id] = {pre_lo(r), pre_hi(r)};
            table.post[id] = {post_lo(r), post_hi(r)};
        }
        lo = post_lo;
        hi = post_hi;
    }
    return table;
}

namespace {

// Affine forms a.x + d, one row per neuron of the current layer.
struct FormSet {
    Eigen::MatrixXd lo_a, up_a;
    Eigen::VectorXd lo_c, up_c;
};

Eigen::VectorXd concrete_min(const Eigen::MatrixXd& a, const Eigen::VectorXd& c,
                             const InputBox& box) {
    return a.cwiseMax(0.0) * box.low + a.cwiseMin(0.0) * box.high + c;
}

Eigen::VectorXd concrete_max(const Eigen::MatrixXd& a, const Eigen::VectorXd& c,
                             const InputBox& box) {
    return a.cwiseMax(0.0) * box.high + a.cwiseMin(0.0) * box.low + c;
}

}  // namespace

BoundsTable symbolic_bounds(const Network& net, const InputBox& box) {
    net.validate();
    if (box.dim() != net.input_dim)
        throw std::invalid_argument("symbolic_bounds: box dimension mismatch");

    BoundsTable table;
    table.reference = net.name;
    for (int i = 0; i < net.input_dim; ++i) {
        table.pre[net.inputs[i].id] = {box.low(i), box.high(i)};
        table.post[net.inputs[i].id] = {box.low(i), box.high(i)};
    }

    const int n = net.input_dim;
    FormSet forms;
    forms.lo_a = Eigen::MatrixXd::Identity(n, n);
    forms.up_a = forms.lo_a;
    forms.lo_c = Eigen::VectorXd::Zero(n);
    forms.up_c = forms.lo_c;

    for (int l = 0; l < net.num_layers(); ++l) {
        const Layer& layer = net.layers[l];
        const Eigen::MatrixXd pos = layer.weights.cwiseMax(0.0);
        const Eigen::MatrixXd neg = layer.weights.cwiseMin(0.0);
        FormSet next;
        next.lo_a = pos * forms.lo_a + neg * forms.up_a;
        next.lo_c = pos * forms.lo_c + neg * forms.up_c + layer.biases;
        next.up_a = pos * forms.up_a + neg * forms.lo_a;
        next.up_c = pos * forms.up_c + neg * forms.lo_c + layer.biases;

        Eigen::VectorXd pre_lo = concrete_min(next.lo_a, next.lo_c, box);
        Eigen::VectorXd pre_hi = concrete_max(next.up_a, next.up_c, box);

        for (int r = 0; r < layer.size(); ++r)
            table.pre[layer.neurons[r].id] = {pre_lo(r), pre_hi(r)};

        if (layer.activation == Activation::ReLU) {
            Eigen::VectorXd up_lo = concrete_min(next.up_a, next.up_c, box);
            for (int r = 0; r < layer.size(); ++r) {
                const NeuronId id = layer.neurons[r].id;
                const double l_lo = pre_lo(r);
                const double u_hi = pre_hi(r);
                if (l_lo >= 0) {
                    table.post[id] = {l_lo, u_hi};
                    continue;
                }
                if (u_hi <= 0) {
                    next.lo_a.row(r).setZero();
                    next.lo_c(r) = 0;
                    next.up_a.row(r).setZero();
                    next.up_c(r) = 0;
                    table.post[id] = {0, 0};
                    continue;
                }
                // Unstable: zero lower form, triangle relaxation on the upper form.
                next.lo_a.row(r).setZero();
                next.lo_c(r) = 0;
                if (up_lo(r) < 0) {
                    const double lam = u_hi / (u_hi - up_lo(r));
                    next.up_a.row(r) *= lam;
                    next.up_c(r) = lam * next.up_c(r) - lam * up_lo(r);
                }
                table.post[id] = {0, u_hi};
            }
        } else {
            for (int r = 0; r < layer.size(); ++r)
                table.post[layer.neurons[r].id] = {pre_lo(r), pre_hi(r)};
        }
        forms = std::move(next);
    }
    return table;
}

void annotate_bounds(Network& net, const BoundsTable& table) {
    for (auto& layer : net.layers)
        for (auto& m : layer.neurons)
            if (table.has(m.id))
                m.bounds = table.post_at(m.id);
}

}  // namespace relucegar
