#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace plandistill {

// Root of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller handed us something that violates a precondition.
class InputError : public Error {
public:
    using Error::Error;
};

// A record in a line-delimited file could not be decoded.
class LoadError : public Error {
public:
    LoadError(std::size_t line, std::string field, const std::string& what)
        : Error("line " + std::to_string(line) + ": field '" + field + "': " + what),
          line_(line), field_(std::move(field)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

class RetrievalError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

// Upstream failure. status is the last HTTP status seen (0 when the transport
// itself failed), attempts is how many upstream calls were made.
class BackendError : public Error {
public:
    BackendError(const std::string& what, int status, int attempts)
        : Error(what), status_(status), attempts_(attempts) {}

    int status() const noexcept { return status_; }
    int attempts() const noexcept { return attempts_; }

private:
    int status_;
    int attempts_;
};

// Misconfiguration that should abort a whole run.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace plandistill
