#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "relucegar/abstraction.hpp"
#include "relucegar/bounds.hpp"
#include "relucegar/cegar.hpp"
#include "relucegar/nnet_io.hpp"
#include "relucegar/preprocess.hpp"
#include "relucegar/problem.hpp"
#include "relucegar/verify.hpp"

using nlohmann::json;
using namespace relucegar;

namespace {

struct CommonOptions {
    std::string engine = "bab";
    std::string external_cmd;
    std::string bounds_kind = "symbolic";
    int samples = 100;
    std::uint64_t seed = 0;
    bool no_abstraction = false;
    bool no_prune = false;
    double timeout = 0.0;
    bool trace_refinement = false;
    bool deterministic = false;
    int max_unstable = 20;
    double min_box_width = 1e-4;

    void attach(CLI::App* app) {
        app->add_option("--engine", engine, "Verification engine: pattern, bab or external")
            ->check(CLI::IsMember({"pattern", "bab", "external"}));
        app->add_option("--external-cmd", external_cmd,
                        "External engine command with {network} and {property} placeholders");
        app->add_option("--bounds", bounds_kind, "Bound computation: interval or symbolic")
            ->check(CLI::IsMember({"interval", "symbolic"}));
        app->add_option("--samples", samples, "Sample count for the abstraction loop");
        app->add_option("--seed", seed, "RNG seed for sampling");
        app->add_flag("--no-abstraction", no_abstraction, "Verify the preprocessed network directly");
        app->add_flag("--no-prune", no_prune, "Keep all-zero-outgoing neurons after preprocessing");
        app->add_option("--timeout", timeout, "Per-problem time budget in seconds");
        app->add_flag("--trace-refinement", trace_refinement,
                      "Emit one JSON line per refinement step on stderr");
        app->add_flag("--deterministic", deterministic, "Force single-threaded execution");
        app->add_option("--max-unstable", max_unstable, "Pattern enumeration budget");
        app->add_option("--min-box-width", min_box_width,
                        "BaB leaf width as a fraction of the original box width");
    }

    CegarConfig to_config() const {
        CegarConfig config;
        if (engine == "pattern")
            config.engine.kind = EngineConfig::Kind::PatternEnum;
        else if (engine == "bab")
            config.engine.kind = EngineConfig::Kind::BranchAndBound;
        else
            config.engine.kind = EngineConfig::Kind::External;
        config.engine.external_command = external_cmd;
        config.engine.max_unstable = max_unstable;
        config.engine.min_box_width = min_box_width;
        config.engine.use_symbolic_bounds = bounds_kind == "symbolic";
        config.use_symbolic_bounds = bounds_kind == "symbolic";
        config.sample_count = samples;
        config.seed = seed;
        config.abstraction_enabled = !no_abstraction;
        config.prune_dead_neurons = !no_prune;
        config.time_budget = timeout;
        if (trace_refinement) {
            config.refinement_trace = [](const RefinementTraceEntry& e) {
                json j;
                j["step_id"] = e.step_id;
                j["kind"] = e.kind == AbstractionStep::Kind::Merge ? "split" : "recover";
                j["profit"] = e.profit;
                j["remaining"] = e.remaining;
                std::cerr << j.dump() << "\n";
            };
        }
        return config;
    }
};

json stats_to_json(const SolveStats& stats) {
    json j;
    j["iterations"] = stats.iterations;
    const auto& hist = stats.abstract_size_history;
    json sizes = json::array();
    if (!hist.empty()) {
        sizes.push_back(hist[0]);
        sizes.push_back(hist.size() > 1 ? hist[1] : hist[0]);
        sizes.push_back(hist.size() > 2 ? hist[2] : hist.back());
        sizes.push_back(hist.back());
    }
    j["hidden_sizes"] = sizes;
    j["size_history"] = hist;
    j["timings"] = {{"preprocess", stats.preprocess_time},
                    {"bounds", stats.bounds_time},
                    {"abstraction", stats.abstraction_time},
                    {"refinement", stats.refinement_time},
                    {"engine", stats.engine_time},
                    {"total", stats.total_time}};
    j["refinement_rounds"] = stats.refinement_rounds;
    j["refinement_steps"] = stats.refinement_steps;
    j["engine_nodes"] = stats.engine_nodes;
    return j;
}

json verdict_to_json(const Verdict& verdict) {
    json j = stats_to_json(verdict.stats);
    j["verdict"] = outcome_name(verdict.outcome);
    if (verdict.outcome == Outcome::Violated)
        j["counterexample"] =
            std::vector<double>(verdict.counterexample.data(),
                                verdict.counterexample.data() + verdict.counterexample.size());
    if (!verdict.reason.empty())
        j["reason"] = verdict.reason;
    return j;
}

int exit_code(Outcome outcome) {
    switch (outcome) {
        case Outcome::Holds: return 0;
        case Outcome::Violated: return 1;
        case Outcome::Unknown: return 2;
    }
    return 2;
}

void write_report(const json& report, const std::string& path) {
    if (path.empty())
        return;
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error(path + ": cannot open report file");
    out << report.dump(2) << "\n";
}

Eigen::VectorXd normalize_input(const Network& net, const Eigen::VectorXd& x) {
    if (!net.normalization)
        return x;
    const auto& norm = *net.normalization;
    Eigen::VectorXd out = x.cwiseMax(norm.input_min).cwiseMin(norm.input_max);
    for (int i = 0; i < out.size(); ++i)
        out(i) = (out(i) - norm.mean(i)) / norm.range(i);
    return out;
}

int cmd_verify(const std::string& net_path, const std::string& property_path,
               const std::string& x0_path, double delta, int target, bool robust,
               bool normalize, bool emit_protocol, const std::string& report_path,
               const CommonOptions& options) {
    Network net = load_nnet(net_path);
    const CegarConfig config = options.to_config();

    json report;
    Outcome overall = Outcome::Holds;

    if (robust) {
        Eigen::VectorXd x0 = load_vector_json(x0_path);
        if (normalize)
            x0 = normalize_input(net, x0);
        if (target < 0) {
            Eigen::VectorXd scores = evaluate(net, x0);
            target = 0;
            for (int i = 1; i < scores.size(); ++i)
                if (scores(i) > scores(target))
                    target = i;
        }
        auto problems = encode_robustness(net, x0, delta, target);
        report["problems"] = json::array();
        for (const auto& problem : problems) {
            const Verdict verdict = solve(problem, config);
            json entry = verdict_to_json(verdict);
            entry["network"] = problem.network.name;
            report["problems"].push_back(entry);
            if (verdict.outcome == Outcome::Violated) {
                overall = Outcome::Violated;
                report["counterexample"] = entry["counterexample"];
                break;
            }
            if (verdict.outcome == Outcome::Unknown && overall == Outcome::Holds)
                overall = Outcome::Unknown;
        }
        report["verdict"] = overall == Outcome::Holds     ? "robust"
                            : overall == Outcome::Violated ? "not-robust"
                                                            : "unknown";
    } else {
        VerificationProblem problem = load_problem(net, property_path);
        const Verdict verdict = solve(problem, config);
        report = verdict_to_json(verdict);
        overall = verdict.outcome;
        if (emit_protocol) {
            if (verdict.outcome == Outcome::Holds) {
                std::cout << "HOLDS\n";
            } else if (verdict.outcome == Outcome::Violated) {
                std::cout << "VIOLATED ";
                for (int i = 0; i < verdict.counterexample.size(); ++i)
                    std::cout << (i ? "," : "") << std::setprecision(17)
                              << verdict.counterexample(i);
                std::cout << "\n";
            } else {
                std::cout << "UNKNOWN " << verdict.reason << "\n";
            }
        }
    }

    if (!emit_protocol)
        std::cout << report.dump(2) << "\n";
    write_report(report, report_path);
    return exit_code(overall);
}

int cmd_bounds(const std::string& net_path, const std::string& property_path,
               const std::string& bounds_kind, bool preprocessed_flag) {
    Network net = load_nnet(net_path);
    if (preprocessed_flag)
        net = preprocess(net);

    std::ifstream in(property_path);
    if (!in)
        throw std::runtime_error(property_path + ": cannot open property file");
    json pj;
    in >> pj;
    InputBox box;
    const auto& arr = pj.at("box");
    box.low.resize(arr.size());
    box.high.resize(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) {
        box.low(i) = arr[i][0].get<double>();
        box.high(i) = arr[i][1].get<double>();
    }
    if (box.dim() != net.input_dim)
        throw std::runtime_error("property box dimension does not match the network");

    const BoundsTable table =
        bounds_kind == "symbolic" ? symbolic_bounds(net, box) : interval_bounds(net, box);
    json out;
    for (const auto& [id, iv] : table.post)
        out[std::to_string(id)] = {iv.lb, iv.ub};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_abstract(const std::string& net_path, const std::string& property_path,
                 const std::string& dump_dir, const CommonOptions& options) {
    Network net = load_nnet(net_path);
    VerificationProblem problem = load_problem(net, property_path);
    const CegarConfig config = options.to_config();

    Network preprocessed = preprocess(problem.network, config.prune_dead_neurons);
    VerificationProblem prep = problem;
    prep.network = preprocessed;
    const BoundsTable table = config.use_symbolic_bounds
                                  ? symbolic_bounds(preprocessed, problem.box)
                                  : interval_bounds(preprocessed, problem.box);
    AbstractionState state =
        run_abstraction(prep, table, config.sample_count, config.seed);

    json summary;
    summary["hidden_initial"] = problem.network.hidden_count();
    summary["hidden_preprocessed"] = preprocessed.hidden_count();
    summary["hidden_abstracted"] = state.current.hidden_count();
    summary["steps"] = state.log.size();

    if (!dump_dir.empty()) {
        std::filesystem::create_directories(dump_dir);
        json log = json::array();
        for (const auto& step : state.log) {
            json s;
            s["id"] = step.id;
            s["layer"] = step.layer;
            if (step.kind == AbstractionStep::Kind::Merge) {
                s["kind"] = "merge";
                s["left"] = step.left;
                s["right"] = step.right;
                s["result"] = step.result;
            } else {
                s["kind"] = "qfreeze";
                s["target"] = step.target;
                s["constant"] = step.constant;
            }
            log.push_back(s);
        }
        std::ofstream((std::filesystem::path(dump_dir) / "abstraction_log.json").string())
            << log.dump(2) << "\n";

        Network final_net = propagate(state.current);
        annotate_bounds(final_net, table);
        save_nnet(final_net, (std::filesystem::path(dump_dir) / "abstract.nnet").string());

        json meta = json::array();
        auto add_meta = [&meta](const NeuronMeta& m, int layer) {
            json n;
            n["id"] = m.id;
            n["layer"] = layer;
            n["label"] = m.label == Label::Inc ? "inc" : m.label == Label::Dec ? "dec" : "none";
            n["kind"] = m.kind == NeuronKind::Atomic     ? "atomic"
                        : m.kind == NeuronKind::Abstract ? "abstract"
                                                         : "constant";
            if (m.origin >= 0)
                n["origin"] = m.origin;
            if (m.bounds)
                n["bounds"] = {m.bounds->lb, m.bounds->ub};
            meta.push_back(n);
        };
        for (const auto& m : final_net.inputs)
            add_meta(m, -1);
        for (int l = 0; l < final_net.num_layers(); ++l)
            for (const auto& m : final_net.layers[l].neurons)
                add_meta(m, l);
        std::ofstream((std::filesystem::path(dump_dir) / "abstract_meta.json").string())
            << meta.dump(2) << "\n";
        summary["dump_dir"] = dump_dir;
    }

    std::cout << summary.dump(2) << "\n";
    return 0;
}

struct BenchEntry {
    std::string network;
    std::string property;
    std::string robust_input;
    double robust_delta = 0.0;
    int robust_target = -1;
    bool is_robust = false;
    double timeout = 0.0;
};

int cmd_bench(const std::string& manifest_path, int jobs, const std::string& report_path,
              const CommonOptions& options) {
    std::ifstream in(manifest_path);
    if (!in)
        throw std::runtime_error(manifest_path + ": cannot open manifest");
    json manifest;
    in >> manifest;
    if (!manifest.is_array())
        throw std::runtime_error(manifest_path + ": manifest must be a JSON array");

    std::vector<BenchEntry> entries;
    for (const auto& item : manifest) {
        BenchEntry e;
        e.network = item.at("network").get<std::string>();
        if (item.contains("robust")) {
            e.is_robust = true;
            e.robust_input = item.at("robust").at("input").get<std::string>();
            e.robust_delta = item.at("robust").at("delta").get<double>();
            e.robust_target = item.at("robust").value("target", -1);
        } else {
            e.property = item.at("property").get<std::string>();
        }
        e.timeout = item.value("timeout", 0.0);
        entries.push_back(e);
    }

    if (options.deterministic)
        jobs = 1;
    jobs = std::max(1, jobs);

    std::vector<json> results(entries.size());
    std::mutex mu;
    size_t next = 0;
    auto worker = [&]() {
        for (;;) {
            size_t idx;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= entries.size())
                    return;
                idx = next++;
            }
            const BenchEntry& e = entries[idx];
            json entry;
            entry["network"] = e.network;
            try {
                Network net = load_nnet(e.network);
                CegarConfig config = options.to_config();
                if (e.timeout > 0)
                    config.time_budget = e.timeout;

                if (e.is_robust) {
                    Eigen::VectorXd x0 = load_vector_json(e.robust_input);
                    int target = e.robust_target;
                    if (target < 0) {
                        Eigen::VectorXd scores = evaluate(net, x0);
                        target = 0;
                        for (int i = 1; i < scores.size(); ++i)
                            if (scores(i) > scores(target))
                                target = i;
                    }
                    auto problems = encode_robustness(net, x0, e.robust_delta, target);
                    Outcome overall = Outcome::Holds;
                    double total = 0;
                    double abstract_size = 0;
                    int counted = 0;
                    for (const auto& problem : problems) {
                        const Verdict v = solve(problem, config);
                        total += v.stats.total_time;
                        if (v.stats.abstract_size_history.size() > 2) {
                            abstract_size += v.stats.abstract_size_history[2];
                            ++counted;
                        }
                        if (v.outcome == Outcome::Violated) {
                            overall = Outcome::Violated;
                            break;
                        }
                        if (v.outcome == Outcome::Unknown && overall == Outcome::Holds)
                            overall = Outcome::Unknown;
                    }
                    entry["verdict"] = overall == Outcome::Holds     ? "robust"
                                       : overall == Outcome::Violated ? "not-robust"
                                                                       : "unknown";
                    entry["time"] = total;
                    entry["solved"] = overall != Outcome::Unknown;
                    if (counted > 0)
                        entry["abstract_hidden_size"] = abstract_size / counted;
                } else {
                    VerificationProblem problem = load_problem(net, e.property);
                    const Verdict v = solve(problem, config);
                    entry.update(verdict_to_json(v));
                    entry["time"] = v.stats.total_time;
                    entry["solved"] = v.outcome != Outcome::Unknown;
                    if (v.stats.abstract_size_history.size() > 2)
                        entry["abstract_hidden_size"] = v.stats.abstract_size_history[2];
                }
            } catch (const std::exception& ex) {
                entry["error"] = ex.what();
                entry["solved"] = false;
                entry["time"] = 0.0;
            }
            {
                std::lock_guard<std::mutex> lock(mu);
                results[idx] = std::move(entry);
            }
        }
    };

    std::vector<std::thread> pool;
    for (int i = 0; i < jobs; ++i)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();

    json report;
    report["problems"] = results;
    int solved = 0;
    double total_time = 0;
    double size_sum = 0;
    int size_count = 0;
    for (const auto& r : results) {
        if (r.value("solved", false))
            ++solved;
        total_time += r.value("time", 0.0);
        if (r.contains("abstract_hidden_size")) {
            size_sum += r["abstract_hidden_size"].get<double>();
            ++size_count;
        }
    }
    report["aggregate"] = {
        {"solved", solved},
        {"total", results.size()},
        {"average_time", results.empty() ? 0.0 : total_time / results.size()},
        {"average_abstract_hidden_size", size_count == 0 ? 0.0 : size_sum / size_count}};

    std::cout << report.dump(2) << "\n";
    write_report(report, report_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Abstraction-refinement verification of fully connected ReLU networks"};
    app.require_subcommand(1);

    // verify
    auto* verify = app.add_subcommand("verify", "Verify a property or a robustness query");
    std::string net_path, property_path, x0_path, report_path;
    double delta = 0.0;
    int target = -1;
    bool normalize = false, emit_protocol = false;
    CommonOptions verify_options;
    verify->add_option("network", net_path, "NNet file")->required();
    verify->add_option("property", property_path, "Property JSON file");
    verify->add_option("--robust", x0_path, "Robustness query: JSON file with the input point");
    verify->add_option("--delta", delta, "L-infinity perturbation radius");
    verify->add_option("--target", target, "Expected class of the input point");
    verify->add_flag("--normalize", normalize, "Apply NNet normalization to the input point");
    verify->add_flag("--emit-protocol", emit_protocol,
                     "Print HOLDS / VIOLATED x,... instead of the JSON report");
    verify->add_option("--report", report_path, "Write the JSON report to this file");
    verify_options.attach(verify);

    // bounds
    auto* bounds_cmd = app.add_subcommand("bounds", "Dump per-neuron bounds as JSON");
    std::string b_net, b_property, b_kind = "symbolic";
    bool b_preprocessed = false;
    bounds_cmd->add_option("network", b_net, "NNet file")->required();
    bounds_cmd->add_option("property", b_property, "Property JSON file (box)")->required();
    bounds_cmd->add_option("--bounds", b_kind, "interval or symbolic")
        ->check(CLI::IsMember({"interval", "symbolic"}));
    bounds_cmd->add_flag("--preprocessed", b_preprocessed, "Compute on the preprocessed network");

    // abstract
    auto* abstract_cmd = app.add_subcommand("abstract", "Run the abstraction and dump artifacts");
    std::string a_net, a_property, a_dump;
    CommonOptions abstract_options;
    abstract_cmd->add_option("network", a_net, "NNet file")->required();
    abstract_cmd->add_option("property", a_property, "Property JSON file")->required();
    abstract_cmd->add_option("--dump", a_dump, "Directory for the log and the final network");
    abstract_options.attach(abstract_cmd);

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Run a manifest of problems");
    std::string m_path, m_report;
    int jobs = 1;
    CommonOptions bench_options;
    bench_cmd->add_option("manifest", m_path, "Manifest JSON file")->required();
    bench_cmd->add_option("--jobs", jobs, "Worker pool size");
    bench_cmd->add_option("--report", m_report, "Write the JSON report to this file");
    bench_options.attach(bench_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed()) {
            const bool robust = !x0_path.empty();
            if (!robust && property_path.empty())
                throw std::runtime_error("verify needs a property file or --robust");
            return cmd_verify(net_path, property_path, x0_path, delta, target, robust, normalize,
                              emit_protocol, report_path, verify_options);
        }
        if (bounds_cmd->parsed())
            return cmd_bounds(b_net, b_property, b_kind, b_preprocessed);
        if (abstract_cmd->parsed())
            return cmd_abstract(a_net, a_property, a_dump, abstract_options);
        if (bench_cmd->parsed())
            return cmd_bench(m_path, jobs, m_report, bench_options);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
