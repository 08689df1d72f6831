#pragma once

#include <stdexcept>
#include <string>

namespace secgame {

// Base error carrying a short machine-readable code ("CycleDetected",
// "GridTooLarge", ...) next to the human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// Input rejected by semantic validation (bad probability, unknown reference,
// infeasible parameter, ...). Maps to CLI exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Input rejected while reading or decoding a file (malformed JSON, bad CSV
// header, unreadable path). Also maps to CLI exit code 2.
class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace secgame
