#pragma once

#include <stdexcept>
#include <string>

namespace rose {

// Operator-facing error classes; the CLI maps them to exit codes
// (config_error -> 2, data_error -> 3).
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

struct data_error : std::runtime_error {
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rose
