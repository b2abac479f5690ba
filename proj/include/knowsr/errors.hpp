#pragma once

#include <stdexcept>
#include <string>

namespace knowsr {

/// Shape or index disagreement between tensors / network layers.
struct DimensionError : std::invalid_argument {
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// Invalid scalar argument (e.g. non-positive temperature).
struct ParameterError : std::invalid_argument {
    explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

/// Mathematical domain violation (e.g. KL when q = 0 where p > 0).
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite value reached a place that must stay finite.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Operation applied to an object in the wrong state (e.g. stepping a finished episode).
struct StateError : std::logic_error {
    explicit StateError(const std::string& what) : std::logic_error(what) {}
};

/// Not enough stored data to satisfy the request.
struct InsufficientDataError : std::runtime_error {
    explicit InsufficientDataError(const std::string& what) : std::runtime_error(what) {}
};

/// Bad or inconsistent configuration.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace knowsr
