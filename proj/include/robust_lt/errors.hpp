#pragma once

#include <stdexcept>
#include <string>

namespace robust_lt {

enum class ErrorKind {
    InvalidInput,
    SingularMass,
    Singularity,
    PropellantDepleted,
    InvalidScenario,
    Evaluation,
    Mapping,
    RejectedSeed,
    NoSeeds,
    EmptyReport,
    Lineage,
    Config,
    Archive,
};

const char* to_string(ErrorKind kind);

/// Base exception for everything the library throws on a domain failure.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

/// Propagation failure carrying the index of the segment that failed inside a
/// chain (-1 when the failure is not tied to a segment).
class PropagationError : public Error {
public:
    PropagationError(ErrorKind kind, const std::string& message, int segment = -1)
        : Error(kind, message), segment_(segment) {}

    int segment() const { return segment_; }

private:
    int segment_;
};

}  // namespace robust_lt
