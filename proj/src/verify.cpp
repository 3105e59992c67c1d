#include "relucegar/verify.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>

#include "relucegar/abstraction.hpp"
#include "relucegar/bounds.hpp"
#include "relucegar/nnet_io.hpp"
#include "relucegar/simplex.hpp"

namespace relucegar {

namespace {

constexpr double kHoldTol = 1e-7;      // LP maxima up to c + 1e-7 still count as holding
constexpr double kReportSlack = 1e-9;  // a counterexample must achieve y > c + 1e-9

using Clock = std::chrono::steady_clock;

struct Deadline {
    Clock::time_point at;
    bool enabled = false;

    static Deadline from_budget(double seconds) {
        Deadline d;
        if (seconds > 0) {
            d.enabled = true;
            d.at = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                      std::chrono::duration<double>(seconds));
        }
        return d;
    }
    bool expired() const { return enabled && Clock::now() >= at; }
};

Verdict make_unknown(const std::string& reason) {
    Verdict v;
    v.outcome = Outcome::Unknown;
    v.reason = reason;
    return v;
}

BoundsTable compute_bounds(const Network& net, const InputBox& box, const EngineConfig& config) {
    return config.use_symbolic_bounds ? symbolic_bounds(net, box) : interval_bounds(net, box);
}

}  // namespace

void EngineConfig::validate() const {
    if (max_unstable <= 0)
        throw std::invalid_argument("max_unstable must be positive");
    if (min_box_width <= 0)
        throw std::invalid_argument("min_box_width must be positive");
    if (time_budget < 0)
        throw std::invalid_argument("time_budget must be non-negative");
}

namespace {

struct PatternContext {
    const VerificationProblem* problem;
    std::vector<NeuronRef> unstable;                     // enumeration order: (layer, row)
    std::unordered_map<NeuronId, Interval> pre_bounds;   // stability info
};

// Affine model of the network under a fixed phase assignment, plus the phase
// constraints g.x <= h defining the polytope where the model is exact.
struct AffineModel {
    Eigen::RowVectorXd out_coeff;
    double out_const = 0.0;
    Eigen::MatrixXd constraint_a;
    Eigen::VectorXd constraint_b;
};

AffineModel build_affine_model(const PatternContext& ctx, unsigned long pattern) {
    const Network& net = ctx.problem->network;
    const int n = net.input_dim;
    Eigen::MatrixXd coeff = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd offset = Eigen::VectorXd::Zero(n);

    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;

    size_t next_unstable = 0;
    for (int l = 0; l < net.num_layers(); ++l) {
        const Layer& layer = net.layers[l];
        Eigen::MatrixXd pre_coeff = layer.weights * coeff;
        Eigen::VectorXd pre_offset = layer.weights * offset + layer.biases;
        if (layer.activation == Activation::ReLU) {
            for (int r = 0; r < layer.size(); ++r) {
                const Interval& pre = ctx.pre_bounds.at(layer.neurons[r].id);
                bool active;
                if (pre.lb >= 0) {
                    active = true;
                } else if (pre.ub <= 0) {
                    active = false;
                } else {
                    const bool phase = (pattern >> next_unstable) & 1UL;
                    ++next_unstable;
                    active = phase;
                    if (active) {
                        // pre(x) >= 0
                        rows.push_back(-pre_coeff.row(r));
                        rhs.push_back(pre_offset(r));
                    } else {
                        // pre(x) <= 0
                        rows.push_back(pre_coeff.row(r));
                        rhs.push_back(-pre_offset(r));
                    }
                }
                if (!active) {
                    pre_coeff.row(r).setZero();
                    pre_offset(r) = 0.0;
                }
            }
        }
        coeff = std::move(pre_coeff);
        offset = std::move(pre_offset);
    }

    AffineModel model;
    model.out_coeff = coeff.row(0);
    model.out_const = offset(0);
    model.constraint_a.resize(rows.size(), n);
    model.constraint_b.resize(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        model.constraint_a.row(i) = rows[i];
        model.constraint_b(i) = rhs[i];
    }
    return model;
}

}  // namespace

Verdict pattern_enum_verify(const VerificationProblem& problem, const EngineConfig& config) {
    config.validate();
    problem.validate();
    const Deadline deadline = Deadline::from_budget(config.time_budget);
    const Network& net = problem.network;

    PatternContext ctx;
    ctx.problem = &problem;
    const BoundsTable table = compute_bounds(net, problem.box, config);
    for (int l = 0; l + 1 < net.num_layers(); ++l)
        for (int r = 0; r < net.layers[l].size(); ++r) {
            const NeuronId id = net.layers[l].neurons[r].id;
            const Interval& pre = table.pre_at(id);
            ctx.pre_bounds[id] = pre;
            if (pre.lb < 0 && pre.ub > 0)
                ctx.unstable.push_back({l, r});
        }

    if (static_cast<int>(ctx.unstable.size()) > config.max_unstable)
        return make_unknown("pattern budget");

    const int extra = static_cast<int>(problem.halfspaces.size());
    const unsigned long count = 1UL << ctx.unstable.size();
    double best = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_x;

    Verdict verdict;
    for (unsigned long pattern = 0; pattern < count; ++pattern) {
        if (deadline.expired())
            return make_unknown("timeout");
        ++verdict.stats.engine_nodes;
        const AffineModel model = build_affine_model(ctx, pattern);

        LinearProgram lp;
        const int rows = static_cast<int>(model.constraint_b.size());
        lp.A.resize(rows + extra, net.input_dim);
        lp.b.resize(rows + extra);
        if (rows > 0) {
            lp.A.topRows(rows) = model.constraint_a;
            lp.b.head(rows) = model.constraint_b;
        }
        for (int h = 0; h < extra; ++h) {
            lp.A.row(rows + h) = problem.halfspaces[h].a.transpose();
            lp.b(rows + h) = problem.halfspaces[h].b;
        }
        lp.c = model.out_coeff.transpose();
        lp.lower = problem.box.low;
        lp.upper = problem.box.high;

        const LpResult res = solve_lp(lp);
        if (res.status != LpStatus::Optimal)
            continue;  // infeasible polytope (unbounded impossible over a box)
        const double value = res.objective + model.out_const;
        if (value > best) {
            best = value;
            best_x = res.x;
        }
    }

    if (best <= problem.threshold + kHoldTol) {
        verdict.outcome = Outcome::Holds;
        return verdict;
    }
    // Clamp the LP solution into the box (simplex feasibility is 1e-7) and
    // confirm by concrete evaluation.
    Eigen::VectorXd x = best_x.cwiseMax(problem.box.low).cwiseMin(problem.box.high);
    const double concrete = evaluate(net, x)(0);
    if (concrete > problem.threshold + kReportSlack && problem.contains(x)) {
        verdict.outcome = Outcome::Violated;
        verdict.counterexample = x;
        return verdict;
    }
    return make_unknown("counterexample validation failed");
}

namespace {

struct BabNode {
    InputBox box;
    double ub;
    long id;
};

struct BabNodeOrder {
    bool operator()(const BabNode& a, const BabNode& b) const {
        if (a.ub != b.ub)
            return a.ub < b.ub;  // larger upper bound first
        return a.id > b.id;
    }
};

// Concrete falsification: center, corners, then a short coordinate search.
std::optional<Eigen::VectorXd> falsify_box(const VerificationProblem& problem,
                                           const InputBox& box) {
    const Network& net = problem.network;
    const double bar = problem.threshold + kReportSlack;
    const int n = box.dim();

    Eigen::VectorXd best_x;
    double best_val = -std::numeric_limits<double>::infinity();
    auto try_point = [&](const Eigen::VectorXd& x) {
        for (const auto& h : problem.halfspaces)
            if (h.a.dot(x) > h.b)
                return false;
        const double v = evaluate(net, x)(0);
        if (v > best_val) {
            best_val = v;
            best_x = x;
        }
        return v > bar;
    };

    if (try_point(box.center()))
        return best_x;
    if (n <= 12) {
        for (unsigned long mask = 0; mask < (1UL << n); ++mask) {
            Eigen::VectorXd x(n);
            for (int i = 0; i < n; ++i)
                x(i) = ((mask >> i) & 1UL) ? box.high(i) : box.low(i);
            if (try_point(x))
                return best_x;
        }
    }
    if (best_val == -std::numeric_limits<double>::infinity())
        return std::nullopt;  // nothing feasible sampled

    // Coordinate pattern search from the best point so far.
    Eigen::VectorXd step = 0.25 * (box.high - box.low);
    Eigen::VectorXd x = best_x;
    for (int iter = 0; iter < 8; ++iter) {
        bool improved = false;
        for (int i = 0; i < n; ++i) {
            if (step(i) == 0.0)
                continue;
            for (double dir : {1.0, -1.0}) {
                Eigen::VectorXd y = x;
                y(i) = std::min(box.high(i), std::max(box.low(i), x(i) + dir * step(i)));
                const double before = best_val;
                if (try_point(y))
                    return best_x;
                if (best_val > before) {
                    x = y;
                    improved = true;
                }
            }
        }
        if (!improved)
            step *= 0.5;
    }
    return std::nullopt;
}

}  // namespace

Verdict bab_verify(const VerificationProblem& problem, const EngineConfig& config) {
    config.validate();
    problem.validate();
    const Deadline deadline = Deadline::from_budget(config.time_budget);
    const Network& net = problem.network;
    const Eigen::VectorXd min_width = config.min_box_width * (problem.box.high - problem.box.low);

    auto upper_bound = [&](const InputBox& box) {
        const BoundsTable t = compute_bounds(net, box, config);
        return t.post_at(net.output_id()).ub;
    };

    Verdict verdict;
    long next_id = 0;
    std::priority_queue<BabNode, std::vector<BabNode>, BabNodeOrder> queue;
    queue.push({problem.box, upper_bound(problem.box), next_id++});
    bool leaf_unknown = false;
    std::string leaf_reason;

    while (!queue.empty()) {
        if (deadline.expired())
            return make_unknown("timeout");
        BabNode node = queue.top();
        queue.pop();
        ++verdict.stats.engine_nodes;
        if (node.ub <= problem.threshold + kReportSlack)
            break;  // best-first: everything left is bounded too

        if (auto x = falsify_box(problem, node.box)) {
            verdict.outcome = Outcome::Violated;
            verdict.counterexample = *x;
            return verdict;
        }

        bool narrow = true;
        for (int i = 0; i < node.box.dim(); ++i)
            if (node.box.high(i) - node.box.low(i) > min_width(i)) {
                narrow = false;
                break;
            }
        if (narrow) {
            VerificationProblem leaf = problem;
            leaf.box = node.box;
            EngineConfig leaf_config = config;
            leaf_config.time_budget = 0;  // governed by the shared deadline
            const Verdict sub = pattern_enum_verify(leaf, leaf_config);
            verdict.stats.engine_nodes += sub.stats.engine_nodes;
            if (sub.outcome == Outcome::Violated) {
                verdict.outcome = Outcome::Violated;
                verdict.counterexample = sub.counterexample;
                return verdict;
            }
            if (sub.outcome == Outcome::Unknown) {
                leaf_unknown = true;
                leaf_reason = sub.reason;
            }
            continue;
        }

        int widest = 0;
        for (int i = 1; i < node.box.dim(); ++i)
            if (node.box.high(i) - node.box.low(i) >
                node.box.high(widest) - node.box.low(widest))
                widest = i;
        const double mid = 0.5 * (node.box.low(widest) + node.box.high(widest));
        InputBox left = node.box;
        left.high(widest) = mid;
        InputBox right = node.box;
        right.low(widest) = mid;
        queue.push({left, upper_bound(left), next_id++});
        queue.push({right, upper_bound(right), next_id++});
    }

    if (leaf_unknown)
        return make_unknown(leaf_reason.empty() ? "pattern budget" : leaf_reason);
    verdict.outcome = Outcome::Holds;
    return verdict;
}

namespace {

std::string substitute(const std::string& templ, const std::string& key,
                       const std::string& value) {
    std::string out = templ;
    const std::string token = "{" + key + "}";
    size_t pos = 0;
    while ((pos = out.find(token, pos)) != std::string::npos) {
        out.replace(pos, token.size(), value);
        pos += value.size();
    }
    return out;
}

}  // namespace

Verdict external_verify(const VerificationProblem& problem, const std::string& command_template) {
    problem.validate();
    namespace fs = std::filesystem;

    std::mt19937_64 rng(std::random_device{}());
    const fs::path dir =
        fs::temp_directory_path() / ("relucegar-" + std::to_string(rng() & 0xffffff));
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        return make_unknown("cannot create temp directory: " + ec.message());

    const fs::path net_path = dir / "network.nnet";
    const fs::path prop_path = dir / "property.json";
    Verdict verdict;
    try {
        save_nnet(propagate(problem.network), net_path.string());
        save_property(problem, prop_path.string());

        std::string cmd = substitute(command_template, "network", net_path.string());
        cmd = substitute(cmd, "property", prop_path.string());

        FILE* pipe = ::popen(cmd.c_str(), "r");
        if (!pipe) {
            fs::remove_all(dir, ec);
            return make_unknown("failed to launch external engine");
        }
        std::string output;
        char buf[4096];
        size_t got;
        while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0)
            output.append(buf, got);
        const int status = ::pclose(pipe);
        fs::remove_all(dir, ec);

        if (status != 0) {
            std::ostringstream os;
            os << "external engine exited with status " << status;
            return make_unknown(os.str());
        }

        std::istringstream lines(output);
        std::string line;
        while (std::getline(lines, line)) {
            std::istringstream ls(line);
            std::string word;
            ls >> word;
            if (word == "HOLDS") {
                verdict.outcome = Outcome::Holds;
                return verdict;
            }
            if (word == "VIOLATED") {
                std::string rest;
                std::getline(ls, rest);
                std::vector<double> coords;
                std::istringstream cs(rest);
                std::string tok;
                while (std::getline(cs, tok, ',')) {
                    try {
                        if (tok.find_first_not_of(" \t\r\n") == std::string::npos)
                            continue;
                        coords.push_back(std::stod(tok));
                    } catch (const std::exception&) {
                        return make_unknown("unparseable counterexample from external engine");
                    }
                }
                if (static_cast<int>(coords.size()) != problem.network.input_dim)
                    return make_unknown("invalid counterexample");
                Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(coords.data(), coords.size());
                if (!problem.contains(x) ||
                    evaluate(problem.network, x)(0) <= problem.threshold - kReportSlack)
                    return make_unknown("invalid counterexample");
                verdict.outcome = Outcome::Violated;
                verdict.counterexample = x;
                return verdict;
            }
        }
        return make_unknown("unparseable engine output");
    } catch (const std::exception& e) {
        fs::remove_all(dir, ec);
        return make_unknown(std::string("external engine failure: ") + e.what());
    }
}

Verdict run_engine(const VerificationProblem& problem, const EngineConfig& config) {
    switch (config.kind) {
        case EngineConfig::Kind::PatternEnum:
            return pattern_enum_verify(problem, config);
        case EngineConfig::Kind::BranchAndBound:
            return bab_verify(problem, config);
        case EngineConfig::Kind::External:
            if (config.external_command.empty())
                return make_unknown("no external command configured");
            return external_verify(problem, config.external_command);
    }
    return make_unknown("unknown engine kind");
}

}  // namespace relucegar
