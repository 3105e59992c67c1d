#pragma once

#include <cstdint>
#include <functional>

#include "relucegar/problem.hpp"
#include "relucegar/refinement.hpp"
#include "relucegar/verify.hpp"

namespace relucegar {

struct CegarConfig {
    EngineConfig engine;
    int sample_count = 100;
    std::uint64_t seed = 0;
    bool abstraction_enabled = true;
    int max_cegar_iterations = 1000000;
    double time_budget = 0.0;  // whole-solve budget in seconds; 0 = unlimited
    bool use_symbolic_bounds = true;
    bool prune_dead_neurons = true;
    RefinementTraceFn refinement_trace;
    // Called after each refinement round with (round, ce, propagated value at ce).
    std::function<void(int, const Eigen::VectorXd&, double)> round_hook;

    void validate() const;
};

// End-to-end driver: preprocess, compute bounds once, abstract, then verify /
// refine until a conclusive verdict. Every Violated result is re-validated on
// the original network.
Verdict solve(const VerificationProblem& problem, const CegarConfig& config = {});

}  // namespace relucegar
