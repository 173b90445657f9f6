#pragma once

#include <stdexcept>
#include <string>

namespace ovqe {

// Error taxonomy shared by all modules. The CLI maps these onto exit codes:
// argument/format/io -> 2, codec -> 3, numeric -> 4.
struct ArgumentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CodecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ovqe
