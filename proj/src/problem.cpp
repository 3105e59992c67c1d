#include "relucegar/problem.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace relucegar {

using nlohmann::json;

void VerificationProblem::validate() const {
    network.validate();
    if (network.output_dim() != 1)
        throw std::runtime_error("verification problem requires a single output neuron");
    if (box.dim() != network.input_dim || box.high.size() != network.input_dim)
        throw std::runtime_error("input box dimension does not match the network");
    for (int i = 0; i < box.dim(); ++i)
        if (box.low(i) > box.high(i))
            throw std::runtime_error("input box has low > high");
    for (const auto& h : halfspaces)
        if (h.a.size() != network.input_dim)
            throw std::runtime_error("halfspace dimension does not match the network");
}

bool VerificationProblem::contains(const Eigen::VectorXd& x, double tol) const {
    if (x.size() != box.dim())
        return false;
    for (int i = 0; i < box.dim(); ++i)
        if (x(i) < box.low(i) - tol || x(i) > box.high(i) + tol)
            return false;
    for (const auto& h : halfspaces)
        if (h.a.dot(x) > h.b + tol)
            return false;
    return true;
}

std::string outcome_name(Outcome o) {
    switch (o) {
        case Outcome::Holds: return "holds";
        case Outcome::Violated: return "violated";
        case Outcome::Unknown: return "unknown";
    }
    return "unknown";
}

std::vector<VerificationProblem> encode_robustness(const Network& net,
                                                   const Eigen::VectorXd& x0, double delta,
                                                   int target) {
    net.validate();
    const int classes = net.output_dim();
    if (target < 0 || target >= classes)
        throw std::invalid_argument("robustness target class out of range");
    if (delta < 0)
        throw std::invalid_argument("robustness delta must be non-negative");
    Eigen::VectorXd scores = evaluate(net, x0);
    int argmax = 0;
    for (int i = 1; i < classes; ++i)
        if (scores(i) > scores(argmax))
            argmax = i;
    if (argmax != target)
        throw std::invalid_argument("x0 is not classified as the stated target class");

    InputBox box;
    box.low = x0.array() - delta;
    box.high = x0.array() + delta;
    if (net.normalization) {
        box.low = box.low.cwiseMax(net.normalization->input_min);
        box.high = box.high.cwiseMin(net.normalization->input_max);
        for (int i = 0; i < box.dim(); ++i)
            if (box.low(i) > box.high(i))
                box.low(i) = box.high(i) = std::min(std::max(x0(i), net.normalization->input_min(i)),
                                                    net.normalization->input_max(i));
    }

    std::vector<VerificationProblem> out;
    const Layer& last = net.output_layer();
    for (int a = 0; a < classes; ++a) {
        if (a == target)
            continue;
        // out_a - out_target, composed into a single affine output layer so the
        // layer-activation invariant is preserved.
        Network m = net;
        Layer diff;
        diff.weights = last.weights.row(a) - last.weights.row(target);
        diff.biases = Eigen::VectorXd::Constant(1, last.biases(a) - last.biases(target));
        diff.activation = Activation::Identity;
        NeuronId max_id = 0;
        for (const auto& l : net.layers)
            for (const auto& nm : l.neurons)
                max_id = std::max(max_id, nm.id);
        for (const auto& nm : net.inputs)
            max_id = std::max(max_id, nm.id);
        diff.neurons = {make_neuron(max_id + 1)};
        m.layers.back() = std::move(diff);
        std::ostringstream os;
        os << net.name << "_adv" << a;
        m.name = os.str();

        VerificationProblem p;
        p.network = std::move(m);
        p.box = box;
        p.threshold = 0.0;
        out.push_back(std::move(p));
    }
    return out;
}

VerificationProblem shift_to_origin(const VerificationProblem& problem, Eigen::VectorXd& offset) {
    offset = problem.box.low;
    VerificationProblem out = problem;
    out.box.low = Eigen::VectorXd::Zero(problem.box.dim());
    out.box.high = problem.box.high - offset;
    out.network.layers[0].biases += out.network.layers[0].weights * offset;
    for (auto& h : out.halfspaces)
        h.b -= h.a.dot(offset);
    if (out.network.normalization) {
        out.network.normalization->input_min -= offset;
        out.network.normalization->input_max -= offset;
    }
    return out;
}

VerificationProblem load_problem(const Network& net, const std::string& property_path) {
    std::ifstream in(property_path);
    if (!in)
        throw std::runtime_error(property_path + ": cannot open property file");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error(property_path + ": " + e.what());
    }
    if (!j.contains("box") || !j.contains("threshold"))
        throw std::runtime_error(property_path + ": property needs 'box' and 'threshold'");

    VerificationProblem p;
    p.network = net;
    const auto& box = j.at("box");
    p.box.low.resize(box.size());
    p.box.high.resize(box.size());
    for (size_t i = 0; i < box.size(); ++i) {
        if (!box[i].is_array() || box[i].size() != 2)
            throw std::runtime_error(property_path + ": box entries must be [lo, hi] pairs");
        p.box.low(i) = box[i][0].get<double>();
        p.box.high(i) = box[i][1].get<double>();
    }
    if (j.contains("halfspaces")) {
        for (const auto& h : j.at("halfspaces")) {
            Halfspace hs;
            const auto& a = h.at("a");
            hs.a.resize(a.size());
            for (size_t i = 0; i < a.size(); ++i)
                hs.a(i) = a[i].get<double>();
            hs.b = h.at("b").get<double>();
            p.halfspaces.push_back(std::move(hs));
        }
    }
    p.threshold = j.at("threshold").get<double>();
    p.validate();
    return p;
}

void save_property(const VerificationProblem& problem, const std::string& path) {
    json j;
    j["box"] = json::array();
    for (int i = 0; i < problem.box.dim(); ++i)
        j["box"].push_back({problem.box.low(i), problem.box.high(i)});
    if (!problem.halfspaces.empty()) {
        j["halfspaces"] = json::array();
        for (const auto& h : problem.halfspaces) {
            json hs;
            hs["a"] = std::vector<double>(h.a.data(), h.a.data() + h.a.size());
            hs["b"] = h.b;
            j["halfspaces"].push_back(hs);
        }
    }
    j["threshold"] = problem.threshold;
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error(path + ": cannot open file for writing");
    out << j.dump(2) << "\n";
}

Eigen::VectorXd load_vector_json(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error(path + ": cannot open file");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    if (!j.is_array())
        throw std::runtime_error(path + ": expected a JSON array of numbers");
    Eigen::VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i)
        v(i) = j[i].get<double>();
    return v;
}

}  // namespace relucegar
