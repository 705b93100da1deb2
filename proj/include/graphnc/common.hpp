#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace graphnc {

inline constexpr const char* kVersion = "0.1.0";

// Per-node anomaly scores; index == node id.
using ScoreVector = std::vector<double>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A required file is missing, unreadable, or unwritable.
struct IoError : Error {
    using Error::Error;
};

// A file exists but its contents violate the format contract.
struct FormatError : Error {
    using Error::Error;
};

// Matrix or vector shapes do not conform.
struct DimensionError : Error {
    using Error::Error;
};

// A configuration value is outside its documented range.
struct ConfigError : Error {
    using Error::Error;
};

// Training produced a non-finite quantity or was invoked on invalid state.
struct TrainingError : Error {
    using Error::Error;
};

// An API usage contract was violated (e.g. a stale forward cache).
struct ContractError : Error {
    using Error::Error;
};

}  // namespace graphnc
