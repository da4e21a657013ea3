#pragma once

#include <stdexcept>
#include <string>

namespace nls {

/// Category of a failure; the CLI maps each one to an exit code.
enum class ErrorKind {
    input,          // malformed or non-finite data, zero columns, parse failures
    dimension,      // shape mismatch between operands
    parameter,      // caller-supplied parameter outside its valid range
    degenerate,     // data admits no meaningful answer (constant distances, all-zero spectrum)
    configuration,  // parameters are individually valid but jointly make the pipeline vacuous
    internal        // broken invariant that should be unreachable
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct InputError : Error {
    explicit InputError(const std::string& w) : Error(ErrorKind::input, w) {}
};
struct DimensionError : Error {
    explicit DimensionError(const std::string& w) : Error(ErrorKind::dimension, w) {}
};
struct ParameterError : Error {
    explicit ParameterError(const std::string& w) : Error(ErrorKind::parameter, w) {}
};
struct DegenerateError : Error {
    explicit DegenerateError(const std::string& w) : Error(ErrorKind::degenerate, w) {}
};
struct ConfigurationError : Error {
    explicit ConfigurationError(const std::string& w) : Error(ErrorKind::configuration, w) {}
};
struct InternalError : Error {
    explicit InternalError(const std::string& w) : Error(ErrorKind::internal, w) {}
};

}  // namespace nls
