#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "relucegar/bounds.hpp"
#include "relucegar/network.hpp"
#include "relucegar/problem.hpp"

namespace relucegar {

// One Merge or QFreeze instance, together with the exact snapshot of
// everything it overwrote. The snapshot is the inverse: max/min merges are not
// information-preserving, so Split/Recover replay these records verbatim.
struct AbstractionStep {
    enum class Kind { Merge, QFreeze };

    int id = -1;  // sequence number within the log
    Kind kind = Kind::Merge;
    int layer = -1;  // index into Network::layers

    // Merge fields
    NeuronId left = -1;
    NeuronId right = -1;
    NeuronId result = -1;

    // QFreeze fields
    NeuronId target = -1;
    double constant = 0.0;

    struct NeuronSnapshot {
        NeuronMeta meta;
        Eigen::VectorXd incoming;
        double bias = 0.0;
        Eigen::VectorXd outgoing;
    };
    NeuronSnapshot undo_left, undo_right;  // Merge
    Eigen::VectorXd undo_incoming;         // QFreeze
    double undo_bias = 0.0;
};

struct AbstractionState {
    Network current;
    std::vector<AbstractionStep> log;
    std::unordered_map<NeuronId, double> values;      // V estimates, live hidden neurons
    std::unordered_map<NeuronId, Interval> derived;   // post-activation intervals incl. inputs
    std::vector<Eigen::VectorXd> samples;             // X
    NeuronId next_neuron_id = 0;
    int next_step_id = 0;
};

// Low-level step application on a bare network; fills the undo snapshot.
// Merge uses step.layer/left/right/result; QFreeze uses step.target/constant.
void apply_merge(Network& net, AbstractionStep& step);
void apply_qfreeze(Network& net, AbstractionStep& step);
void undo_step(Network& net, const AbstractionStep& step);

AbstractionState init_abstraction(const Network& preprocessed, const BoundsTable& table);

// Merges same-layer, same-label hidden neurons j and k: incoming weights and
// bias combine by max (Inc) or min (Dec), outgoing weights by sum. Returns the
// id of the new abstract neuron.
NeuronId merge(AbstractionState& state, int layer, NeuronId j, NeuronId k);

// Freezes an atomic hidden neuron at its Inc upper / Dec lower bound from the
// table: incoming weights zeroed, bias set to the constant.
void qfreeze(AbstractionState& state, NeuronId target, const BoundsTable& table);

// Removes all Constant neurons, folding their value into successor biases.
// Function-equivalent; applied to the copy handed to a verifier.
Network propagate(const Network& net);

double estimate_value(const BoundsTable& table, NeuronId id);

double loss_freeze(const AbstractionState& state, const BoundsTable& table, NeuronId id);
double loss_merge(const AbstractionState& state, int layer, NeuronId j, NeuronId k);

struct StepCandidate {
    AbstractionStep::Kind kind = AbstractionStep::Kind::QFreeze;
    int layer = -1;
    NeuronId target = -1;
    NeuronId partner = -1;  // Merge only
    double loss = 0.0;
};

// Value-guided strategy: target the neuron with the smallest estimated value
// and pick the least-loss step for it. Ties break by loss, then QFreeze before
// Merge, then smallest partner id. Returns nullopt when no step is possible.
std::optional<StepCandidate> select_step(const AbstractionState& state, const BoundsTable& table);

std::vector<Eigen::VectorXd> sample_box(const InputBox& box,
                                        const std::vector<Halfspace>& halfspaces, int count,
                                        std::uint64_t seed);

// Iteratively applies select_step until some sample violates the output
// property (that step is rolled back) or no candidates remain. The problem's
// network must be preprocessed and the table computed on it.
AbstractionState run_abstraction(const VerificationProblem& problem, const BoundsTable& table,
                                 int sample_count, std::uint64_t seed);

}  // namespace relucegar
