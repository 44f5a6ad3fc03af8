#ifndef CAUSALQ_ERROR_HPP
#define CAUSALQ_ERROR_HPP

#include <stdexcept>
#include <string>

namespace causalq {

// Base class for every error raised by the library. The CLI maps these to
// exit code 1 (input/validation problems) or 2 (runtime failures such as a
// scorer endpoint going away), so subtypes matter.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// The input violates a documented precondition or file contract.
struct ValidationError : Error {
    explicit ValidationError(const std::string& what) : Error(what) {}
};

// A remote scorer could not be reached (timeouts, connection refused, 5xx
// after retries are exhausted).
struct TransportError : Error {
    explicit TransportError(const std::string& what) : Error(what) {}
};

// A remote scorer answered, but not in the shape the wire contract promises.
struct ProtocolError : Error {
    explicit ProtocolError(const std::string& what) : Error(what) {}
};

} // namespace causalq

#endif
