#pragma once

#include <stdexcept>
#include <string>

namespace jprof {

// Base class for all toolkit errors. Each named error condition from the
// operation contracts gets its own type so callers can catch selectively.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownDomain : Error {
    using Error::Error;
};
struct SourceUnavailable : Error {
    using Error::Error;
};
struct DomainMismatch : Error {
    using Error::Error;
};
struct TimestampRegression : Error {
    using Error::Error;
};
struct CapUnsupported : Error {
    using Error::Error;
};
struct PermissionDenied : Error {
    using Error::Error;
};
struct InvalidArgument : Error {
    using Error::Error;
};
struct InvalidShares : Error {
    using Error::Error;
};
struct OutOfRange : Error {
    using Error::Error;
};
struct ParseError : Error {
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_number(line) {}
    std::size_t line_number;
};
struct NonMonotonicTimestamps : Error {
    using Error::Error;
};
struct Unreachable : Error {
    using Error::Error;
};
struct MalformedResponse : Error {
    using Error::Error;
};
struct CoverageError : Error {
    using Error::Error;
};
struct ConfigMismatch : Error {
    using Error::Error;
};
struct EmptyProfile : Error {
    using Error::Error;
};
struct SpawnFailure : Error {
    using Error::Error;
};
struct NotInnermost : Error {
    using Error::Error;
};
struct AlreadyEnded : Error {
    using Error::Error;
};
struct OpenSpans : Error {
    using Error::Error;
};

}  // namespace jprof
