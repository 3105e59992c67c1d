#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "relucegar/network.hpp"

namespace relucegar {

// a . x <= b
struct Halfspace {
    Eigen::VectorXd a;
    double b = 0.0;
};

struct InputBox {
    Eigen::VectorXd low;
    Eigen::VectorXd high;

    int dim() const { return static_cast<int>(low.size()); }
    Eigen::VectorXd center() const { return 0.5 * (low + high); }
};

// Decide whether y <= threshold for every x in the box that satisfies the halfspaces.
struct VerificationProblem {
    Network network;  // single output neuron
    InputBox box;
    std::vector<Halfspace> halfspaces;
    double threshold = 0.0;

    void validate() const;
    bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const;
};

struct SolveStats {
    int iterations = 0;  // engine calls inside the CEGAR loop
    std::vector<int> abstract_size_history;
    double engine_time = 0.0;
    double total_time = 0.0;
    double preprocess_time = 0.0;
    double bounds_time = 0.0;
    double abstraction_time = 0.0;
    double refinement_time = 0.0;
    int refinement_rounds = 0;
    int refinement_steps = 0;
    long engine_nodes = 0;
};

enum class Outcome { Holds, Violated, Unknown };

struct Verdict {
    Outcome outcome = Outcome::Unknown;
    Eigen::VectorXd counterexample;  // valid when outcome == Violated
    std::string reason;              // set when outcome == Unknown
    SolveStats stats;

    bool holds() const { return outcome == Outcome::Holds; }
    bool violated() const { return outcome == Outcome::Violated; }
};

std::string outcome_name(Outcome o);

// One problem per adversarial class a != target: the network's output layer is
// replaced by the composed difference out_a - out_target, threshold 0, and the
// input box is [x0-delta, x0+delta] clipped to the declared input range.
// Robustness at x0 holds iff every returned problem holds.
std::vector<VerificationProblem> encode_robustness(const Network& net,
                                                   const Eigen::VectorXd& x0, double delta,
                                                   int target);

// Conjugates the problem by z = x - offset so the input box starts at zero:
// the first layer's biases absorb W * offset, halfspace offsets adjust, and
// the network function is unchanged under the bijection. Counterexamples in
// z-space map back as x = z + offset.
VerificationProblem shift_to_origin(const VerificationProblem& problem, Eigen::VectorXd& offset);

// Property files: JSON with box, optional halfspaces, threshold.
VerificationProblem load_problem(const Network& net, const std::string& property_path);
void save_property(const VerificationProblem& problem, const std::string& path);

Eigen::VectorXd load_vector_json(const std::string& path);

}  // namespace relucegar
