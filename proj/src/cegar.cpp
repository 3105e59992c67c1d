#include "relucegar/cegar.hpp"

#include <chrono>
#include <stdexcept>

#include "relucegar/abstraction.hpp"
#include "relucegar/bounds.hpp"
#include "relucegar/preprocess.hpp"

namespace relucegar {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr double kHoldTol = 1e-7;
constexpr double kReportSlack = 1e-9;

}  // namespace

void CegarConfig::validate() const {
    engine.validate();
    if (sample_count < 0)
        throw std::invalid_argument("sample_count must be non-negative");
    if (max_cegar_iterations < 1)
        throw std::invalid_argument("max_cegar_iterations must be at least 1");
    if (time_budget < 0)
        throw std::invalid_argument("time_budget must be non-negative");
}

Verdict solve(const VerificationProblem& original_problem, const CegarConfig& config) {
    config.validate();
    original_problem.validate();
    const auto t_start = Clock::now();

    // Merge soundness needs nonnegative predecessor values, so conjugate the
    // problem to a box anchored at the origin whenever some low is negative.
    VerificationProblem problem = original_problem;
    Eigen::VectorXd offset = Eigen::VectorXd::Zero(problem.box.dim());
    if ((original_problem.box.low.array() < 0).any())
        problem = shift_to_origin(original_problem, offset);

    Verdict verdict;
    SolveStats& stats = verdict.stats;
    auto finish = [&](Verdict v) {
        v.stats.total_time = seconds_since(t_start);
        return v;
    };
    auto out_of_time = [&]() {
        return config.time_budget > 0 && seconds_since(t_start) >= config.time_budget;
    };

    stats.abstract_size_history.push_back(problem.network.hidden_count());

    auto t_phase = Clock::now();
    Network preprocessed = preprocess(problem.network, config.prune_dead_neurons);
    stats.preprocess_time = seconds_since(t_phase);
    stats.abstract_size_history.push_back(preprocessed.hidden_count());

    VerificationProblem prep_problem = problem;
    prep_problem.network = preprocessed;

    t_phase = Clock::now();
    const BoundsTable table = config.use_symbolic_bounds
                                  ? symbolic_bounds(preprocessed, problem.box)
                                  : interval_bounds(preprocessed, problem.box);
    stats.bounds_time = seconds_since(t_phase);

    // Trivially true: the output's sound upper bound already satisfies Q.
    if (table.post_at(preprocessed.output_id()).ub <= problem.threshold) {
        verdict.outcome = Outcome::Holds;
        stats.abstract_size_history.push_back(preprocessed.hidden_count());
        return finish(verdict);
    }

    auto validate_on_original = [&](const Eigen::VectorXd& x) {
        return original_problem.contains(x) &&
               evaluate(original_problem.network, x)(0) >
                   original_problem.threshold - kReportSlack;
    };

    // Sampling shortcut: a sample that already violates on the (equivalent)
    // preprocessed network settles the problem without any engine call.
    const auto samples =
        sample_box(problem.box, problem.halfspaces, config.sample_count, config.seed);
    for (const auto& z : samples) {
        if (evaluate(preprocessed, z)(0) > problem.threshold + kHoldTol &&
            validate_on_original(z + offset)) {
            verdict.outcome = Outcome::Violated;
            verdict.counterexample = z + offset;
            stats.abstract_size_history.push_back(preprocessed.hidden_count());
            return finish(verdict);
        }
    }

    AbstractionState state;
    if (config.abstraction_enabled) {
        t_phase = Clock::now();
        state = run_abstraction(prep_problem, table, config.sample_count, config.seed);
        stats.abstraction_time = seconds_since(t_phase);
        stats.abstract_size_history.push_back(state.current.hidden_count());
    } else {
        stats.abstract_size_history.push_back(preprocessed.hidden_count());
    }

    for (;;) {
        if (stats.iterations >= config.max_cegar_iterations)
            return finish(Verdict{Outcome::Unknown, {}, "cegar budget", stats});
        if (out_of_time())
            return finish(Verdict{Outcome::Unknown, {}, "timeout", stats});

        VerificationProblem sub = problem;
        sub.network = config.abstraction_enabled ? propagate(state.current) : preprocessed;

        EngineConfig engine = config.engine;
        if (config.time_budget > 0) {
            const double remaining = config.time_budget - seconds_since(t_start);
            engine.time_budget = engine.time_budget > 0
                                     ? std::min(engine.time_budget, remaining)
                                     : remaining;
        }

        t_phase = Clock::now();
        Verdict engine_verdict = run_engine(sub, engine);
        stats.engine_time += seconds_since(t_phase);
        stats.engine_nodes += engine_verdict.stats.engine_nodes;
        ++stats.iterations;

        if (engine_verdict.outcome == Outcome::Holds) {
            verdict.outcome = Outcome::Holds;
            return finish(verdict);
        }
        if (engine_verdict.outcome == Outcome::Unknown) {
            verdict.outcome = Outcome::Unknown;
            verdict.reason = engine_verdict.reason;
            return finish(verdict);
        }

        const Eigen::VectorXd ce = engine_verdict.counterexample;
        if (evaluate(preprocessed, ce)(0) > problem.threshold) {
            if (!validate_on_original(ce + offset)) {
                verdict.outcome = Outcome::Unknown;
                verdict.reason = "counterexample failed validation on the original network";
                return finish(verdict);
            }
            verdict.outcome = Outcome::Violated;
            verdict.counterexample = ce + offset;
            return finish(verdict);
        }

        // Spurious: refine until ce is excluded, then ask the engine again.
        t_phase = Clock::now();
        ++stats.refinement_rounds;
        RefinementSession session(state, preprocessed);
        stats.refinement_steps += session.refine_until_excluded(
            ce, problem.threshold, stats.refinement_rounds, config.refinement_trace);
        stats.refinement_time += seconds_since(t_phase);
        stats.abstract_size_history.push_back(state.current.hidden_count());
        if (config.round_hook)
            config.round_hook(stats.refinement_rounds, ce,
                              evaluate(propagate(state.current), ce)(0));
    }
}

}  // namespace relucegar
