#pragma once

#include <stdexcept>
#include <string>

namespace longdr {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor shapes that do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of an operation (log of a
// non-positive number, non-finite values).
class DomainError : public Error {
public:
    using Error::Error;
};

// Caller broke a documented precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& where, const std::string& what)
        : Error(where + ": " + what), where_(where) {}
    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class EstimatorError : public Error {
public:
    using Error::Error;
};

} // namespace longdr
