#pragma once

#include <stdexcept>
#include <string>

namespace fgm {

/// Base class for all errors raised by the library. The exit code is what
/// the command-line front end returns when the error escapes a command.
class Error : public std::runtime_error {
public:
    Error(const std::string& what, int exit_code)
        : std::runtime_error(what), exit_code_(exit_code) {}

    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

/// Bad flags, bad arguments, inconsistent options.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(what, 2) {}
};

/// Malformed or inconsistent input files.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what, 3) {}
};

/// Parse failure on a text input, carrying the 1-based line number.
class ParseError : public DataError {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : DataError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Group or tree structure violating its invariants.
class StructureError : public DataError {
public:
    explicit StructureError(const std::string& what) : DataError(what) {}
};

/// A solver produced a non-finite objective.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, long iteration)
        : Error(what + " (iteration " + std::to_string(iteration) + ")", 4), iteration_(iteration) {}

    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

/// Violated precondition of an in-process API (dimension mismatch, negative duals, ...).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(what, 2) {}
};

}  // namespace fgm
