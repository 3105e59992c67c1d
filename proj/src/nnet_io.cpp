#include "relucegar/nnet_io.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace relucegar {

namespace {

class LineReader {
public:
    LineReader(std::istream& in, const std::string& path) : in_(in), path_(path) {}

    // Next non-comment, non-blank line.
    std::string next(const char* what) {
        std::string line;
        while (std::getline(in_, line)) {
            ++lineno_;
            auto first = line.find_first_not_of(" \t\r\n");
            if (first == std::string::npos)
                continue;
            if (line.compare(first, 2, "//") == 0)
                continue;
            return line;
        }
        fail(std::string("unexpected end of file while reading ") + what);
        return {};
    }

    [[noreturn]] void fail(const std::string& msg) const {
        std::ostringstream os;
        os << path_ << ":" << lineno_ << ": " << msg;
        throw NnetParseError(os.str());
    }

    int lineno() const { return lineno_; }

private:
    std::istream& in_;
    std::string path_;
    int lineno_ = 0;
};

std::vector<double> parse_numbers(LineReader& reader, const std::string& line, const char* what) {
    std::vector<double> out;
    std::string token;
    std::istringstream is(line);
    while (std::getline(is, token, ',')) {
        auto first = token.find_first_not_of(" \t\r\n");
        if (first == std::string::npos)
            continue;  // trailing comma convention
        auto last = token.find_last_not_of(" \t\r\n");
        token = token.substr(first, last - first + 1);
        try {
            size_t used = 0;
            double v = std::stod(token, &used);
            if (used != token.size())
                throw std::invalid_argument("");
            out.push_back(v);
        } catch (const std::exception&) {
            reader.fail(std::string("non-numeric token '") + token + "' in " + what);
        }
    }
    if (out.empty())
        reader.fail(std::string("empty ") + what + " line");
    return out;
}

std::vector<double> read_numbers(LineReader& reader, const char* what) {
    return parse_numbers(reader, reader.next(what), what);
}

}  // namespace

Network load_nnet(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw NnetParseError(path + ": cannot open file");
    LineReader reader(in, path);

    auto header = read_numbers(reader, "header");
    if (header.size() < 4)
        reader.fail("header must contain numLayers, inputSize, outputSize, maxLayerSize");
    const int num_layers = static_cast<int>(header[0]);
    const int input_size = static_cast<int>(header[1]);
    const int output_size = static_cast<int>(header[2]);
    if (num_layers < 1 || input_size < 1 || output_size < 1)
        reader.fail("header sizes must be positive");

    auto sizes = read_numbers(reader, "layer sizes");
    if (static_cast<int>(sizes.size()) != num_layers + 1)
        reader.fail("layer size line must list numLayers+1 entries");
    if (static_cast<int>(sizes[0]) != input_size)
        reader.fail("first layer size does not match inputSize");
    if (static_cast<int>(sizes.back()) != output_size)
        reader.fail("last layer size does not match outputSize");

    reader.next("legacy flag line");  // ignored

    auto mins = read_numbers(reader, "input minimums");
    auto maxes = read_numbers(reader, "input maximums");
    auto means = read_numbers(reader, "means");
    auto ranges = read_numbers(reader, "ranges");
    if (static_cast<int>(mins.size()) != input_size || static_cast<int>(maxes.size()) != input_size)
        reader.fail("input min/max lines must have inputSize entries");
    if (static_cast<int>(means.size()) != input_size + 1 ||
        static_cast<int>(ranges.size()) != input_size + 1)
        reader.fail("mean/range lines must have inputSize+1 entries");

    Network net;
    net.input_dim = input_size;
    net.inputs.resize(input_size);
    Normalization norm;
    norm.input_min = Eigen::Map<Eigen::VectorXd>(mins.data(), mins.size());
    norm.input_max = Eigen::Map<Eigen::VectorXd>(maxes.data(), maxes.size());
    norm.mean = Eigen::Map<Eigen::VectorXd>(means.data(), means.size());
    norm.range = Eigen::Map<Eigen::VectorXd>(ranges.data(), ranges.size());
    net.normalization = norm;

    int prev = input_size;
    for (int l = 1; l <= num_layers; ++l) {
        const int rows = static_cast<int>(sizes[l]);
        Layer layer;
        layer.weights.resize(rows, prev);
        layer.biases.resize(rows);
        layer.activation = (l == num_layers) ? Activation::Identity : Activation::ReLU;
        layer.neurons.resize(rows);
        for (int r = 0; r < rows; ++r) {
            auto row = read_numbers(reader, "weight row");
            if (static_cast<int>(row.size()) != prev) {
                std::ostringstream os;
                os << "weight row has " << row.size() << " entries, expected " << prev;
                reader.fail(os.str());
            }
            for (int c = 0; c < prev; ++c)
                layer.weights(r, c) = row[c];
        }
        for (int r = 0; r < rows; ++r) {
            auto bias = read_numbers(reader, "bias");
            if (bias.size() != 1)
                reader.fail("bias line must contain a single value");
            layer.biases(r) = bias[0];
        }
        net.layers.push_back(std::move(layer));
        prev = rows;
    }

    assign_ids(net);
    net.name = std::filesystem::path(path).stem().string();
    net.validate();
    return net;
}

void save_nnet(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error(path + ": cannot open file for writing");
    out << std::setprecision(17);

    int max_size = net.input_dim;
    for (const auto& layer : net.layers)
        max_size = std::max(max_size, layer.size());

    out << "// " << (net.name.empty() ? "network" : net.name) << "\n";
    out << net.num_layers() << "," << net.input_dim << "," << net.output_dim() << ","
        << max_size << ",\n";
    out << net.input_dim << ",";
    for (const auto& layer : net.layers)
        out << layer.size() << ",";
    out << "\n0,\n";

    Normalization norm;
    if (net.normalization) {
        norm = *net.normalization;
    } else {
        norm.input_min = Eigen::VectorXd::Constant(net.input_dim, -1e12);
        norm.input_max = Eigen::VectorXd::Constant(net.input_dim, 1e12);
        norm.mean = Eigen::VectorXd::Zero(net.input_dim + 1);
        norm.range = Eigen::VectorXd::Ones(net.input_dim + 1);
    }
    auto write_vec = [&out](const Eigen::VectorXd& v) {
        for (int i = 0; i < v.size(); ++i)
            out << v(i) << ",";
        out << "\n";
    };
    write_vec(norm.input_min);
    write_vec(norm.input_max);
    write_vec(norm.mean);
    write_vec(norm.range);

    for (const auto& layer : net.layers) {
        for (int r = 0; r < layer.size(); ++r) {
            for (int c = 0; c < layer.weights.cols(); ++c)
                out << layer.weights(r, c) << ",";
            out << "\n";
        }
        for (int r = 0; r < layer.size(); ++r)
            out << layer.biases(r) << ",\n";
    }
    if (!out)
        throw std::runtime_error(path + ": write failed");
}

}  // namespace relucegar
