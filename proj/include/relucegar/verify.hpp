#pragma once

#include <string>

#include "relucegar/problem.hpp"

namespace relucegar {

struct EngineConfig {
    enum class Kind { PatternEnum, BranchAndBound, External };

    Kind kind = Kind::BranchAndBound;
    int max_unstable = 20;          // pattern enumeration budget
    double min_box_width = 1e-4;    // BaB leaf size, fraction of the original width per dim
    double time_budget = 0.0;       // seconds; 0 means unlimited
    std::string external_command;   // template with {network} and {property}
    bool use_symbolic_bounds = true;

    void validate() const;
};

// Enumerates ReLU phase assignments over the unstable neurons; on each phase
// polytope the network is affine and max y is an LP. Exact up to the stated
// tolerances; refuses when more than max_unstable neurons are unstable.
Verdict pattern_enum_verify(const VerificationProblem& problem, const EngineConfig& config = {});

// Branch-and-bound over the input box: prunes boxes whose symbolic upper bound
// already satisfies the property, falsifies with concrete samples, and falls
// back to pattern enumeration on sufficiently narrow boxes. Complete given the
// fallback.
Verdict bab_verify(const VerificationProblem& problem, const EngineConfig& config = {});

// Runs an external solver: writes the propagated network (NNet) and the
// property (JSON) to a temp directory, substitutes the paths into the command
// template, and parses stdout for `HOLDS` or `VIOLATED x1,x2,...`. Reported
// counterexamples are re-validated by concrete evaluation and membership in P.
Verdict external_verify(const VerificationProblem& problem, const std::string& command_template);

Verdict run_engine(const VerificationProblem& problem, const EngineConfig& config);

}  // namespace relucegar
