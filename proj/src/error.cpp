#include "orchard/error.hpp"

#include <utility>

namespace orchard {

namespace {

std::string join_violations(const std::vector<std::string>& violations)
{
    std::string out = "validation failed:";
    for (const auto& v : violations) {
        out += "\n  - ";
        out += v;
    }
    return out;
}

} // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations))
{
}

ProtocolError::ProtocolError(const std::string& message, std::string line)
    : std::runtime_error(message + ": " + line), line_(std::move(line))
{
}

} // namespace orchard
