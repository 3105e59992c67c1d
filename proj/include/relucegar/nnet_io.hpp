#pragma once

#include <stdexcept>
#include <string>

#include "relucegar/network.hpp"

namespace relucegar {

struct NnetParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Reads a network in the ACAS Xu NNet text convention: leading // comments,
// 7 header lines, then per layer the weight rows followed by the bias lines.
Network load_nnet(const std::string& path);

void save_nnet(const Network& net, const std::string& path);

}  // namespace relucegar
