#pragma once

#include <stdexcept>
#include <string>

namespace maxroam {

/// Rejected configuration or argument (degenerate layer, infeasible task family, ...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A structural invariant of a partition or network was found broken.
/// The message starts with the invariant's name.
class InvariantViolation : public std::logic_error {
public:
    InvariantViolation(const std::string& invariant, const std::string& detail)
        : std::logic_error(invariant + ": " + detail), invariant_(invariant) {}

    const std::string& invariant() const noexcept { return invariant_; }

private:
    std::string invariant_;
};

}  // namespace maxroam
