#pragma once

#include <stdexcept>
#include <string>

namespace ats {

/// Shape or width disagreement between operands.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// NaN/inf input, or a linear system that cannot be factorized.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed, truncated or inconsistent documents and records.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ats
