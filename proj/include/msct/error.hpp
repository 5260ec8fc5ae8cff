#pragma once

#include <stdexcept>
#include <string>

namespace msct {

enum class ErrorKind {
    invalid_input,
    numeric_domain,
    size_limit,
    unsupported_case,
    singular_jacobian,
    divergence,
    io,
};

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::numeric_domain: return "numeric-domain";
    case ErrorKind::size_limit: return "size-limit";
    case ErrorKind::unsupported_case: return "unsupported-case";
    case ErrorKind::singular_jacobian: return "singular-jacobian";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what)
        , kind_(kind)
    {
    }
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool cond, const std::string& what, ErrorKind kind = ErrorKind::invalid_input)
{
    if (!cond)
        throw Error(kind, what);
}

} // namespace msct
