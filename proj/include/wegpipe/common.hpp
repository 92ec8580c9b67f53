#pragma once

#include <stdexcept>
#include <string>

namespace wegpipe {

// Error taxonomy. Shape/usage/config problems are programming or input
// mistakes (invalid_argument); format/numeric/training problems surface at
// runtime from data (runtime_error).
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace wegpipe
