#pragma once

#include <stdexcept>
#include <string>

namespace fts {

// Error taxonomy shared by every layer of the library. The C API maps these
// onto status codes; the CLI maps them onto exit codes.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/axis violations in tensor or transform operations.
struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Invalid model/train configuration (out-of-range field, inconsistent combo).
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Broken input data: malformed .ts text, bad labels, empty partitions.
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Parse failure with the offending line recorded.
struct ParseError : DataError {
    ParseError(const std::string& msg, int line)
        : DataError("line " + std::to_string(line) + ": " + msg), line_no(line) {}
    int line_no;
};

// Divergence or other failure inside a training run.
struct TrainingError : Error {
    explicit TrainingError(const std::string& msg, int epoch = -1)
        : Error(msg), epoch(epoch) {}
    int epoch;
};

// Violated internal contract (non-scalar loss, mismatched optimizer state).
struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Filesystem failures when emitting artifacts.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace fts
