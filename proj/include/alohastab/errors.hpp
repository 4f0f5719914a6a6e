#pragma once

#include <stdexcept>

namespace alohastab {

// Bad inputs / violated preconditions. The CLI maps these to exit code 1.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Solver or integrator failure on otherwise valid inputs. Exit code 2 in the CLI.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace alohastab
