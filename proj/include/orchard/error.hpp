#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace orchard {

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input document. `what()` carries line/field context.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A well-formed document that violates one or more data-model invariants.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> violations);

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

class NotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// External detector broke the line protocol. Holds the offending line verbatim.
class ProtocolError : public std::runtime_error {
public:
    ProtocolError(const std::string& message, std::string line);

    const std::string& line() const noexcept { return line_; }

private:
    std::string line_;
};

/// The detector answered a request with an explicit failure.
class DetectorFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace orchard
