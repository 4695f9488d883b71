#pragma once

#include <stdexcept>

namespace veritas {

// Numerical failure (non-convergence, divergence), as opposed to input
// validation errors. The CLI maps these to exit code 2.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace veritas
