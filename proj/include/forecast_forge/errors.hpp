#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace forecast_forge {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller passed an argument outside the documented domain.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Inconsistent definitions: bad policy rows, termination outside (0,1]
/// under strict mode, mode/policy mismatch, missing config keys.
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// Text input could not be parsed; carries the 1-based line when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

/// Parsed input violates a structural rule; lists every offending item.
class ValidationError : public Error {
public:
    ValidationError(const std::string& what, std::vector<std::string> offenders)
        : Error(join(what, offenders)), offenders_(std::move(offenders)) {}
    const std::vector<std::string>& offenders() const noexcept { return offenders_; }

private:
    static std::string join(const std::string& what, const std::vector<std::string>& items) {
        std::string out = what;
        for (const auto& item : items) out += "\n  " + item;
        return out;
    }
    std::vector<std::string> offenders_;
};

/// The expected outcome is unbounded: a closed class of states never
/// terminates while accumulating nonzero cumulant.
class DivergentForecast : public Error {
public:
    DivergentForecast(const std::string& what, std::vector<std::size_t> states)
        : Error(what), states_(std::move(states)) {}
    const std::vector<std::size_t>& states() const noexcept { return states_; }

private:
    std::vector<std::size_t> states_;
};

class NotInitiable : public Error {
public:
    using Error::Error;
};

class RolloutOverrun : public Error {
public:
    using Error::Error;
};

/// Some reachable state has no admissible action.
class DeadState : public Error {
public:
    DeadState(const std::string& what, std::vector<std::size_t> states)
        : Error(what), states_(std::move(states)) {}
    const std::vector<std::size_t>& states() const noexcept { return states_; }

private:
    std::vector<std::size_t> states_;
};

/// Registry assembly or curriculum scheduling failed.
class CurriculumError : public Error {
public:
    using Error::Error;
};

/// A layer could not start because a prerequisite layer did not verify.
class GateFailure : public Error {
public:
    GateFailure(const std::string& what, std::vector<int> forecasts)
        : Error(what), forecasts_(std::move(forecasts)) {}
    const std::vector<int>& forecasts() const noexcept { return forecasts_; }

private:
    std::vector<int> forecasts_;
};

/// Saved parameters belong to a different world.
class DigestMismatch : public Error {
public:
    using Error::Error;
};

}  // namespace forecast_forge
