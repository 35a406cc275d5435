#pragma once

#include <stdexcept>
#include <string>

namespace bankcf {

// Base class for every failure raised by the library. The CLI maps these to
// exit status 1 and prints what().
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Column or feature set does not match what an operation expects.
class SchemaError : public Error {
public:
    SchemaError(const std::string& msg, std::string feature)
        : Error(msg), feature_(std::move(feature)) {}
    explicit SchemaError(const std::string& msg) : Error(msg) {}

    const std::string& feature() const noexcept { return feature_; }

private:
    std::string feature_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t line) : Error(msg), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateKeyError : public Error {
public:
    using Error::Error;
};

class LabelingError : public Error {
public:
    LabelingError(const std::string& msg, std::string bank_id)
        : Error(msg), bank_id_(std::move(bank_id)) {}
    const std::string& bank_id() const noexcept { return bank_id_; }

private:
    std::string bank_id_;
};

class SplitError : public Error {
public:
    using Error::Error;
};

// Retryable network failure (connection refused, 5xx, timeouts).
class TransportError : public Error {
public:
    using Error::Error;
};

class BalancingError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class UnsupportedFeatureError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

// Wrong arity of a feature vector or matrix.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Non-finite or otherwise invalid input values.
class InputError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Wraps a pipeline failure with the stage in which it happened.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& cause)
        : Error(stage + ": " + cause), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace bankcf
