#pragma once

#include <stdexcept>
#include <string>

namespace guardkit {

// Base class for all toolkit errors. The CLI maps subclasses onto exit codes:
// config errors -> 2, transport errors -> 3, data/validation errors -> 4.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- config class ---------------------------------------------------------

class ConfigError : public Error {
public:
    using Error::Error;
};

// --- transport class ------------------------------------------------------

class TransportError : public Error {
public:
    using Error::Error;
};

class TimeoutError : public TransportError {
public:
    using TransportError::TransportError;
};

// Endpoint answered with a well-formed error payload; never retried.
class EndpointError : public Error {
public:
    using Error::Error;
};

// --- data / validation class ----------------------------------------------

class ParseError : public Error {
public:
    ParseError(const std::string& message, int line)
        : Error(message + " (line " + std::to_string(line) + ")"), line_(line) {}
    explicit ParseError(const std::string& message) : Error(message) {}
    int line() const { return line_; }

private:
    int line_ = -1;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class UnknownCategory : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class VerdictParseError : public Error {
public:
    using Error::Error;
};

class GuardParseError : public Error {
public:
    using Error::Error;
};

class BudgetExhausted : public Error {
public:
    using Error::Error;
};

class MissingGold : public Error {
public:
    using Error::Error;
};

class MalformedVotes : public Error {
public:
    using Error::Error;
};

class EmptyCorpus : public Error {
public:
    using Error::Error;
};

class MissingLabel : public Error {
public:
    using Error::Error;
};

}  // namespace guardkit
