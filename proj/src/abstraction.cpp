#include "relucegar/abstraction.hpp"

#include <algorithm>
#include <random>
#include <sstream>
#include <stdexcept>

#include "relucegar/matrix_util.hpp"

namespace relucegar {

namespace {

int row_of(const Network& net, int layer, NeuronId id) {
    const auto& neurons = net.layers[layer].neurons;
    for (int i = 0; i < static_cast<int>(neurons.size()); ++i)
        if (neurons[i].id == id)
            return i;
    std::ostringstream os;
    os << "neuron " << id << " not found in layer " << layer;
    throw std::invalid_argument(os.str());
}

int sorted_position(const std::vector<NeuronMeta>& neurons, NeuronId id) {
    int pos = 0;
    while (pos < static_cast<int>(neurons.size()) && neurons[pos].id < id)
        ++pos;
    return pos;
}

void insert_neuron(Network& net, int layer_index, const AbstractionStep::NeuronSnapshot& snap) {
    Layer& layer = net.layers[layer_index];
    Layer& succ = net.layers[layer_index + 1];
    if (snap.incoming.size() != layer.weights.cols() || snap.outgoing.size() != succ.size())
        throw std::runtime_error("undo snapshot no longer matches the layer shape");
    const int pos = sorted_position(layer.neurons, snap.meta.id);
    layer.weights = insert_row(layer.weights, pos, snap.incoming);
    layer.biases = insert_entry(layer.biases, pos, snap.bias);
    layer.neurons.insert(layer.neurons.begin() + pos, snap.meta);
    succ.weights = insert_col(succ.weights, pos, snap.outgoing);
}

void remove_neuron(Network& net, int layer_index, int row) {
    Layer& layer = net.layers[layer_index];
    Layer& succ = net.layers[layer_index + 1];
    layer.weights = remove_row(layer.weights, row);
    layer.biases = remove_entry(layer.biases, row);
    layer.neurons.erase(layer.neurons.begin() + row);
    succ.weights = remove_col(succ.weights, row);
}

AbstractionStep::NeuronSnapshot snapshot_neuron(const Network& net, int layer_index, int row) {
    AbstractionStep::NeuronSnapshot s;
    const Layer& layer = net.layers[layer_index];
    s.meta = layer.neurons[row];
    s.incoming = layer.weights.row(row);
    s.bias = layer.biases(row);
    s.outgoing = net.layers[layer_index + 1].weights.col(row);
    return s;
}

}  // namespace

void apply_merge(Network& net, AbstractionStep& step) {
    if (step.layer < 0 || step.layer + 1 >= net.num_layers())
        throw std::invalid_argument("merge: not a hidden layer");
    Layer& layer = net.layers[step.layer];
    const int rj = row_of(net, step.layer, step.left);
    const int rk = row_of(net, step.layer, step.right);
    const NeuronMeta& mj = layer.neurons[rj];
    const NeuronMeta& mk = layer.neurons[rk];
    if (mj.label != mk.label || mj.label == Label::None)
        throw std::invalid_argument("merge: operands must share an Inc/Dec label");
    if (mj.kind == NeuronKind::Constant || mk.kind == NeuronKind::Constant)
        throw std::invalid_argument("merge: operands must not be constant neurons");

    step.undo_left = snapshot_neuron(net, step.layer, rj);
    step.undo_right = snapshot_neuron(net, step.layer, rk);

    const bool inc = (mj.label == Label::Inc);
    Eigen::VectorXd incoming;
    if (inc)
        incoming = step.undo_left.incoming.cwiseMax(step.undo_right.incoming);
    else
        incoming = step.undo_left.incoming.cwiseMin(step.undo_right.incoming);
    const double bias = inc ? std::max(step.undo_left.bias, step.undo_right.bias)
                            : std::min(step.undo_left.bias, step.undo_right.bias);
    Eigen::VectorXd outgoing = step.undo_left.outgoing + step.undo_right.outgoing;

    remove_neuron(net, step.layer, std::max(rj, rk));
    remove_neuron(net, step.layer, std::min(rj, rk));

    AbstractionStep::NeuronSnapshot merged;
    merged.meta = make_neuron(step.result, mj.label, NeuronKind::Abstract, step.id);
    merged.incoming = std::move(incoming);
    merged.bias = bias;
    merged.outgoing = std::move(outgoing);
    insert_neuron(net, step.layer, merged);
}

void apply_qfreeze(Network& net, AbstractionStep& step) {
    const NeuronRef ref = locate(net, step.target);
    if (ref.layer < 0 || ref.layer + 1 >= net.num_layers())
        throw std::invalid_argument("qfreeze: target must be a hidden neuron");
    step.layer = ref.layer;
    Layer& layer = net.layers[ref.layer];
    NeuronMeta& meta = layer.neurons[ref.index];
    if (meta.kind != NeuronKind::Atomic)
        throw std::invalid_argument("qfreeze: target must be an atomic neuron");

    step.undo_incoming = layer.weights.row(ref.index);
    step.undo_bias = layer.biases(ref.index);

    layer.weights.row(ref.index).setZero();
    layer.biases(ref.index) = step.constant;
    meta.kind = NeuronKind::Constant;
    meta.origin = step.target;
}

void undo_step(Network& net, const AbstractionStep& step) {
    if (step.kind == AbstractionStep::Kind::Merge) {
        const int row = row_of(net, step.layer, step.result);
        remove_neuron(net, step.layer, row);
        insert_neuron(net, step.layer, step.undo_left);
        insert_neuron(net, step.layer, step.undo_right);
    } else {
        const int row = row_of(net, step.layer, step.target);
        Layer& layer = net.layers[step.layer];
        if (step.undo_incoming.size() != layer.weights.cols())
            throw std::runtime_error("undo snapshot no longer matches the layer shape");
        layer.weights.row(row) = step.undo_incoming;
        layer.biases(row) = step.undo_bias;
        layer.neurons[row].kind = NeuronKind::Atomic;
        layer.neurons[row].origin = -1;
    }
}

AbstractionState init_abstraction(const Network& preprocessed, const BoundsTable& table) {
    AbstractionState state;
    state.current = preprocessed;
    NeuronId max_id = -1;
    for (const auto& m : preprocessed.inputs)
        max_id = std::max(max_id, m.id);
    for (int l = 0; l < preprocessed.num_layers(); ++l) {
        for (const auto& m : preprocessed.layers[l].neurons) {
            max_id = std::max(max_id, m.id);
            if (l + 1 < preprocessed.num_layers()) {
                if (m.label == Label::None)
                    throw std::invalid_argument("network must be preprocessed (labeled) first");
                state.values[m.id] = estimate_value(table, m.id);
            }
        }
    }
    state.derived = table.post;
    state.next_neuron_id = max_id + 1;
    return state;
}

namespace {

Interval derived_interval(const AbstractionState& state, const Network& net, int layer_index,
                          int row) {
    const Layer& layer = net.layers[layer_index];
    double lo = layer.biases(row);
    double hi = lo;
    const int prev_n = static_cast<int>(layer.weights.cols());
    for (int p = 0; p < prev_n; ++p) {
        const NeuronId pid = layer_index == 0 ? net.inputs[p].id
                                              : net.layers[layer_index - 1].neurons[p].id;
        const Interval& b = state.derived.at(pid);
        const double w = layer.weights(row, p);
        lo += w > 0 ? w * b.lb : w * b.ub;
        hi += w > 0 ? w * b.ub : w * b.lb;
    }
    if (layer.activation == Activation::ReLU) {
        lo = std::max(0.0, lo);
        hi = std::max(0.0, hi);
    }
    return {lo, hi};
}

}  // namespace

namespace {

// Merged incoming weights dominate the operands only where predecessor values
// are nonnegative. Hidden predecessors are post-ReLU; input predecessors are
// nonnegative exactly when the box is.
bool input_box_nonnegative(const AbstractionState& state) {
    for (const auto& m : state.current.inputs) {
        auto it = state.derived.find(m.id);
        if (it == state.derived.end() || it->second.lb < 0)
            return false;
    }
    return true;
}

}  // namespace

NeuronId merge(AbstractionState& state, int layer, NeuronId j, NeuronId k) {
    if (layer == 0 && !input_box_nonnegative(state))
        throw std::invalid_argument(
            "merge in the first hidden layer requires a nonnegative input box");
    AbstractionStep step;
    step.id = state.next_step_id++;
    step.kind = AbstractionStep::Kind::Merge;
    step.layer = layer;
    step.left = j;
    step.right = k;
    step.result = state.next_neuron_id++;
    apply_merge(state.current, step);
    state.log.push_back(step);

    const int row = row_of(state.current, layer, step.result);
    const Interval iv = derived_interval(state, state.current, layer, row);
    state.derived[step.result] = iv;
    state.values[step.result] = 0.5 * (iv.lb + iv.ub);
    state.values.erase(j);
    state.values.erase(k);
    state.derived.erase(j);
    state.derived.erase(k);
    return step.result;
}

void qfreeze(AbstractionState& state, NeuronId target, const BoundsTable& table) {
    if (!table.has(target))
        throw std::invalid_argument("qfreeze: no bounds entry for target neuron");
    const NeuronRef ref = locate(state.current, target);
    const NeuronMeta& meta = meta_at(state.current, ref);
    const Interval& b = table.post_at(target);

    AbstractionStep step;
    step.id = state.next_step_id++;
    step.kind = AbstractionStep::Kind::QFreeze;
    step.target = target;
    step.constant = meta.label == Label::Inc ? b.ub : b.lb;
    apply_qfreeze(state.current, step);
    state.log.push_back(step);

    state.values[target] = step.constant;
    state.derived[target] = {step.constant, step.constant};
}

Network propagate(const Network& net) {
    Network out = net;
    for (int l = 0; l + 1 < out.num_layers(); ++l) {
        Layer& layer = out.layers[l];
        Layer& succ = out.layers[l + 1];
        std::vector<int> constants;
        for (int r = 0; r < layer.size(); ++r)
            if (layer.neurons[r].kind == NeuronKind::Constant)
                constants.push_back(r);
        for (int r : constants)
            succ.biases += succ.weights.col(r) * layer.biases(r);
        for (auto it = constants.rbegin(); it != constants.rend(); ++it)
            remove_neuron(out, l, *it);
    }
    return out;
}

double estimate_value(const BoundsTable& table, NeuronId id) {
    const Interval& b = table.post_at(id);
    return 0.5 * (b.lb + b.ub);
}

double loss_freeze(const AbstractionState& state, const BoundsTable& table, NeuronId id) {
    const NeuronRef ref = locate(state.current, id);
    const NeuronMeta& meta = meta_at(state.current, ref);
    const Interval& b = table.post_at(id);
    const double constant = meta.label == Label::Inc ? b.ub : b.lb;
    return std::abs(constant - state.values.at(id));
}

namespace {

double merge_ratio(const Eigen::VectorXd& merged, const Eigen::VectorXd& original) {
    const double denom = original.cwiseAbs().sum();
    if (denom == 0.0)
        return 0.0;
    return (merged - original).cwiseAbs().sum() / denom;
}

}  // namespace

double loss_merge(const AbstractionState& state, int layer, NeuronId j, NeuronId k) {
    const Network& net = state.current;
    const Layer& l = net.layers[layer];
    const int rj = row_of(net, layer, j);
    const int rk = row_of(net, layer, k);
    const Eigen::VectorXd wj = l.weights.row(rj);
    const Eigen::VectorXd wk = l.weights.row(rk);
    Eigen::VectorXd merged;
    if (l.neurons[rj].label == Label::Inc)
        merged = wj.cwiseMax(wk);
    else
        merged = wj.cwiseMin(wk);
    return merge_ratio(merged, wj) * state.values.at(j) +
           merge_ratio(merged, wk) * state.values.at(k);
}

std::optional<StepCandidate> select_step(const AbstractionState& state, const BoundsTable& table) {
    const Network& net = state.current;
    const bool first_layer_mergeable = input_box_nonnegative(state);
    std::vector<std::pair<double, NeuronRef>> order;
    for (int l = 0; l + 1 < net.num_layers(); ++l)
        for (int r = 0; r < net.layers[l].size(); ++r) {
            const NeuronMeta& m = net.layers[l].neurons[r];
            if (m.kind == NeuronKind::Constant)
                continue;
            order.push_back({state.values.at(m.id), {l, r}});
        }
    std::sort(order.begin(), order.end(), [&net](const auto& a, const auto& b) {
        if (a.first != b.first)
            return a.first < b.first;
        return meta_at(net, a.second).id < meta_at(net, b.second).id;
    });

    for (const auto& [value, ref] : order) {
        (void)value;
        const NeuronMeta& target = meta_at(net, ref);
        std::optional<StepCandidate> best;
        auto rank = [](const StepCandidate& c) {
            // QFreeze wins loss ties, then the smaller partner id.
            return std::make_tuple(c.loss, c.kind == AbstractionStep::Kind::QFreeze ? 0 : 1,
                                   c.partner);
        };
        auto consider = [&best, &rank](const StepCandidate& c) {
            if (!best || rank(c) < rank(*best))
                best = c;
        };
        if (target.kind == NeuronKind::Atomic && table.has(target.id)) {
            StepCandidate c;
            c.kind = AbstractionStep::Kind::QFreeze;
            c.layer = ref.layer;
            c.target = target.id;
            c.loss = loss_freeze(state, table, target.id);
            consider(c);
        }
        const Layer& layer = net.layers[ref.layer];
        const int partner_count = (ref.layer > 0 || first_layer_mergeable) ? layer.size() : 0;
        for (int r = 0; r < partner_count; ++r) {
            const NeuronMeta& partner = layer.neurons[r];
            if (partner.id == target.id || partner.kind == NeuronKind::Constant ||
                partner.label != target.label)
                continue;
            StepCandidate c;
            c.kind = AbstractionStep::Kind::Merge;
            c.layer = ref.layer;
            c.target = target.id;
            c.partner = partner.id;
            c.loss = loss_merge(state, ref.layer, target.id, partner.id);
            consider(c);
        }
        if (best)
            return best;
    }
    return std::nullopt;
}

std::vector<Eigen::VectorXd> sample_box(const InputBox& box,
                                        const std::vector<Halfspace>& halfspaces, int count,
                                        std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uniform = [&rng](double lo, double hi) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    };
    std::vector<Eigen::VectorXd> out;
    const long max_attempts = std::max<long>(1000, 200L * count);
    for (long attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < count;
         ++attempt) {
        Eigen::VectorXd x(box.dim());
        for (int i = 0; i < box.dim(); ++i)
            x(i) = uniform(box.low(i), box.high(i));
        bool ok = true;
        for (const auto& h : halfspaces)
            if (h.a.dot(x) > h.b) {
                ok = false;
                break;
            }
        if (ok)
            out.push_back(std::move(x));
    }
    return out;
}

AbstractionState run_abstraction(const VerificationProblem& problem, const BoundsTable& table,
                                 int sample_count, std::uint64_t seed) {
    AbstractionState state = init_abstraction(problem.network, table);
    state.samples = sample_box(problem.box, problem.halfspaces, sample_count, seed);

    auto violates = [&](const Network& net) {
        const Network prop = propagate(net);
        for (const auto& x : state.samples)
            if (evaluate(prop, x)(0) > problem.threshold)
                return true;
        return false;
    };

    if (violates(state.current))
        return state;

    while (auto cand = select_step(state, table)) {
        std::vector<std::pair<NeuronId, std::pair<double, Interval>>> saved;
        auto stash = [&](NeuronId id) {
            saved.push_back({id, {state.values.at(id), state.derived.at(id)}});
        };
        stash(cand->target);
        if (cand->kind == AbstractionStep::Kind::Merge) {
            stash(cand->partner);
            merge(state, cand->layer, cand->target, cand->partner);
        } else {
            qfreeze(state, cand->target, table);
        }
        if (violates(state.current)) {
            const AbstractionStep last = state.log.back();
            undo_step(state.current, last);
            state.log.pop_back();
            if (last.kind == AbstractionStep::Kind::Merge) {
                state.values.erase(last.result);
                state.derived.erase(last.result);
            }
            for (const auto& [id, entry] : saved) {
                state.values[id] = entry.first;
                state.derived[id] = entry.second;
            }
            break;
        }
    }
    return state;
}

}  // namespace relucegar
