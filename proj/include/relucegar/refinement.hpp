#pragma once

#include <functional>
#include <map>
#include <set>
#include <unordered_map>

#include "relucegar/abstraction.hpp"

namespace relucegar {

// Permutation of an abstraction log with all QFreeze steps first, backwards
// layer by layer (stable within a layer); the Merge subsequence is kept
// verbatim. Replaying it from the preprocessed network produces a network
// weight-identical to replaying the original log.
std::vector<AbstractionStep> implicit_order(const std::vector<AbstractionStep>& log);

// Replays the steps' parameters on `base` (which is mutated), recording fresh
// undo snapshots consistent with this replay order.
std::vector<AbstractionStep> replay_with_snapshots(Network& base,
                                                   std::vector<AbstractionStep> steps);

// DAG over abstraction steps; an edge from a to b means a depends on b. Only
// steps nobody depends on (in-degree 0) may be reversed soundly.
struct DependencyGraph {
    std::vector<int> vertices;                   // step ids in implicit order
    std::map<int, std::vector<int>> depends_on;  // edges: key depends on each value
    std::map<int, int> in_degree;

    bool has_vertex(int id) const { return in_degree.count(id) != 0; }
    bool is_available(int id) const;
    std::set<int> available() const;
    void remove(int id);
};

DependencyGraph build_dependency_graph(const std::vector<AbstractionStep>& tau_prime);

struct RefinementTraceEntry {
    int round = 0;
    int step_id = -1;
    AbstractionStep::Kind kind = AbstractionStep::Kind::Merge;
    double profit = 0.0;
    int remaining = 0;  // surviving abstraction steps after this one
};
using RefinementTraceFn = std::function<void(const RefinementTraceEntry&)>;

// Owns one refinement round's bookkeeping: reorders the state's log into the
// implicit order, re-snapshots it by replay from the preprocessed network, and
// builds the dependency graph. Split/Recover apply the snapshots exactly.
class RefinementSession {
public:
    RefinementSession(AbstractionState& state, const Network& preprocessed);

    const DependencyGraph& graph() const { return dg_; }
    std::set<int> available() const { return dg_.available(); }

    void split(int merge_step_id);
    void recover(int qfreeze_step_id);

    // Accuracy regained by reversing a step, measured at ce: for Merge the gap
    // between the atomic leaves' value sum and the abstract neuron's value; for
    // QFreeze the gap between the neuron's exact value and the constant.
    double profit(int step_id, const Eigen::VectorXd& ce) const;

    // Repeatedly reverses the maximum-profit available step (ties by smallest
    // step id) until the propagated abstraction maps ce to <= threshold + 1e-9.
    // Returns the number of steps performed.
    int refine_until_excluded(const Eigen::VectorXd& ce, double threshold, int round = 0,
                              const RefinementTraceFn& trace = nullptr);

private:
    const AbstractionStep& step_by_id(int id) const;
    void apply_inverse(AbstractionStep step);
    const std::unordered_map<NeuronId, double>& exact_values(const Eigen::VectorXd& ce) const;
    double profit_of(const AbstractionStep& step,
                     const std::unordered_map<NeuronId, double>& exact,
                     const std::unordered_map<NeuronId, double>& abstract_values) const;
    std::unordered_map<NeuronId, double> value_map(const Network& net,
                                                   const Eigen::VectorXd& x) const;

    AbstractionState& state_;
    Network preprocessed_;
    DependencyGraph dg_;
    std::unordered_map<NeuronId, int> producers_;  // merge result id -> step id
    mutable Eigen::VectorXd cached_ce_;
    mutable std::unordered_map<NeuronId, double> ce_values_;
};

}  // namespace relucegar
