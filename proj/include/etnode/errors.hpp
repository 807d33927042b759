#pragma once

#include <stdexcept>
#include <string>

namespace etnode {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Operand shapes do not conform to the requested operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A numeric quantity left the finite range (NaN/Inf) or a numeric
/// precondition failed.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A caller-facing contract was violated (bad argument, empty input, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

/// A test oracle detected an inconsistent probe (non-deterministic function).
class OracleError : public Error {
public:
    using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Input file does not match the expected schema (missing column, ...).
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A cell or token could not be parsed.
class ParseError : public Error {
public:
    using Error::Error;
};

/// The ODE integrator failed (step budget exhausted, ...).
class SolverError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration key or value.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace etnode
