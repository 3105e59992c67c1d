#include "relucegar/refinement.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace relucegar {

std::vector<AbstractionStep> implicit_order(const std::vector<AbstractionStep>& log) {
    std::vector<AbstractionStep> freezes;
    std::vector<AbstractionStep> merges;
    for (const auto& step : log) {
        if (step.kind == AbstractionStep::Kind::QFreeze)
            freezes.push_back(step);
        else
            merges.push_back(step);
    }
    std::stable_sort(freezes.begin(), freezes.end(),
                     [](const AbstractionStep& a, const AbstractionStep& b) {
                         return a.layer > b.layer;
                     });
    freezes.insert(freezes.end(), merges.begin(), merges.end());
    return freezes;
}

std::vector<AbstractionStep> replay_with_snapshots(Network& base,
                                                   std::vector<AbstractionStep> steps) {
    for (auto& step : steps) {
        if (step.kind == AbstractionStep::Kind::Merge)
            apply_merge(base, step);
        else
            apply_qfreeze(base, step);
    }
    return steps;
}

bool DependencyGraph::is_available(int id) const {
    auto it = in_degree.find(id);
    if (it == in_degree.end())
        return false;
    return it->second == 0;
}

std::set<int> DependencyGraph::available() const {
    std::set<int> out;
    for (const auto& [id, deg] : in_degree)
        if (deg == 0)
            out.insert(id);
    return out;
}

void DependencyGraph::remove(int id) {
    auto it = depends_on.find(id);
    if (it != depends_on.end()) {
        for (int dep : it->second) {
            auto d = in_degree.find(dep);
            if (d != in_degree.end())
                --d->second;
        }
        depends_on.erase(it);
    }
    in_degree.erase(id);
    vertices.erase(std::remove(vertices.begin(), vertices.end(), id), vertices.end());
}

DependencyGraph build_dependency_graph(const std::vector<AbstractionStep>& tau_prime) {
    DependencyGraph dg;
    for (const auto& step : tau_prime) {
        dg.vertices.push_back(step.id);
        dg.in_degree[step.id] = 0;
        dg.depends_on[step.id] = {};
    }
    const int n = static_cast<int>(tau_prime.size());
    for (int i = 0; i < n; ++i) {
        const AbstractionStep& later = tau_prime[i];
        for (int j = 0; j < i; ++j) {
            const AbstractionStep& earlier = tau_prime[j];
            bool edge = false;
            if (earlier.kind == AbstractionStep::Kind::QFreeze && earlier.layer > later.layer) {
                edge = true;  // (i): anything below an earlier freeze depends on it
            } else if (later.kind == AbstractionStep::Kind::Merge &&
                       earlier.kind == AbstractionStep::Kind::Merge) {
                // (ii)(a): merges producing an operand; (ii)(b): earlier merges
                // in the adjacent layers.
                if (earlier.result == later.left || earlier.result == later.right)
                    edge = true;
                else if (std::abs(earlier.layer - later.layer) == 1)
                    edge = true;
            }
            if (edge) {
                dg.depends_on[later.id].push_back(earlier.id);
                ++dg.in_degree[earlier.id];
            }
        }
    }
    return dg;
}

RefinementSession::RefinementSession(AbstractionState& state, const Network& preprocessed)
    : state_(state), preprocessed_(preprocessed) {
    std::vector<AbstractionStep> tau = implicit_order(state_.log);
    Network replayed = preprocessed_;
    tau = replay_with_snapshots(replayed, std::move(tau));
    if (!weights_identical(replayed, state_.current))
        throw std::logic_error("implicit-order replay does not reproduce the abstraction");
    state_.log = std::move(tau);
    dg_ = build_dependency_graph(state_.log);
    for (const auto& step : state_.log)
        if (step.kind == AbstractionStep::Kind::Merge)
            producers_[step.result] = step.id;
}

const AbstractionStep& RefinementSession::step_by_id(int id) const {
    for (const auto& step : state_.log)
        if (step.id == id)
            return step;
    std::ostringstream os;
    os << "abstraction step " << id << " is not part of the current log";
    throw std::invalid_argument(os.str());
}

void RefinementSession::apply_inverse(AbstractionStep step) {
    undo_step(state_.current, step);
    dg_.remove(step.id);
    if (step.kind == AbstractionStep::Kind::Merge)
        producers_.erase(step.result);
    const int id = step.id;
    state_.log.erase(std::remove_if(state_.log.begin(), state_.log.end(),
                                    [id](const AbstractionStep& s) { return s.id == id; }),
                     state_.log.end());
}

void RefinementSession::split(int merge_step_id) {
    const AbstractionStep& step = step_by_id(merge_step_id);
    if (step.kind != AbstractionStep::Kind::Merge)
        throw std::invalid_argument("split requires a Merge step");
    if (!dg_.is_available(merge_step_id))
        throw std::invalid_argument("refinement step is not available in the dependency graph");
    apply_inverse(step);
}

void RefinementSession::recover(int qfreeze_step_id) {
    const AbstractionStep& step = step_by_id(qfreeze_step_id);
    if (step.kind != AbstractionStep::Kind::QFreeze)
        throw std::invalid_argument("recover requires a QFreeze step");
    if (!dg_.is_available(qfreeze_step_id))
        throw std::invalid_argument("refinement step is not available in the dependency graph");
    apply_inverse(step);
}

std::unordered_map<NeuronId, double> RefinementSession::value_map(const Network& net,
                                                                  const Eigen::VectorXd& x) const {
    std::unordered_map<NeuronId, double> out;
    const auto values = evaluate_layers(net, x);
    for (int i = 0; i < net.input_dim; ++i)
        out[net.inputs[i].id] = values[0](i);
    for (int l = 0; l < net.num_layers(); ++l)
        for (int r = 0; r < net.layers[l].size(); ++r)
            out[net.layers[l].neurons[r].id] = values[l + 1](r);
    return out;
}

const std::unordered_map<NeuronId, double>& RefinementSession::exact_values(
    const Eigen::VectorXd& ce) const {
    if (cached_ce_.size() != ce.size() || cached_ce_ != ce) {
        ce_values_ = value_map(preprocessed_, ce);
        cached_ce_ = ce;
    }
    return ce_values_;
}

double RefinementSession::profit_of(
    const AbstractionStep& step, const std::unordered_map<NeuronId, double>& exact,
    const std::unordered_map<NeuronId, double>& abstract_values) const {
    if (step.kind == AbstractionStep::Kind::QFreeze)
        return std::abs(exact.at(step.target) - step.constant);

    // Sum of the atomic leaves merged into the abstract neuron, flattened
    // through nested merges.
    double atomic_sum = 0.0;
    std::vector<NeuronId> pending = {step.left, step.right};
    while (!pending.empty()) {
        const NeuronId id = pending.back();
        pending.pop_back();
        auto producer = producers_.find(id);
        if (producer != producers_.end()) {
            const AbstractionStep& inner = step_by_id(producer->second);
            pending.push_back(inner.left);
            pending.push_back(inner.right);
        } else {
            atomic_sum += exact.at(id);
        }
    }
    return std::abs(atomic_sum - abstract_values.at(step.result));
}

double RefinementSession::profit(int step_id, const Eigen::VectorXd& ce) const {
    const AbstractionStep& step = step_by_id(step_id);
    if (!dg_.has_vertex(step_id))
        throw std::invalid_argument("profit: step is not a vertex of the dependency graph");
    return profit_of(step, exact_values(ce), value_map(state_.current, ce));
}

int RefinementSession::refine_until_excluded(const Eigen::VectorXd& ce, double threshold,
                                             int round, const RefinementTraceFn& trace) {
    if (evaluate(preprocessed_, ce)(0) > threshold)
        throw std::invalid_argument("refine_until_excluded: counterexample is not spurious");

    int performed = 0;
    for (;;) {
        const Network prop = propagate(state_.current);
        if (evaluate(prop, ce)(0) <= threshold + 1e-9)
            return performed;
        const std::set<int> avail = dg_.available();
        if (avail.empty())
            throw std::logic_error("no available refinement step while ce is still included");

        const auto& exact = exact_values(ce);
        const auto abstract_values = value_map(state_.current, ce);
        int best_id = -1;
        double best_profit = -1.0;
        for (int id : avail) {  // ascending ids, so ties keep the smallest
            const double p = profit_of(step_by_id(id), exact, abstract_values);
            if (p > best_profit) {
                best_profit = p;
                best_id = id;
            }
        }
        const AbstractionStep& step = step_by_id(best_id);
        const AbstractionStep::Kind kind = step.kind;
        apply_inverse(step);
        ++performed;
        if (trace) {
            RefinementTraceEntry entry;
            entry.round = round;
            entry.step_id = best_id;
            entry.kind = kind;
            entry.profit = best_profit;
            entry.remaining = static_cast<int>(state_.log.size());
            trace(entry);
        }
    }
}

}  // namespace relucegar
