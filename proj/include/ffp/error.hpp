#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ffp {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class InvalidSite : public Error {
public:
    using Error::Error;
};

// Raised when a request exceeds a configured size cap (exact solver states,
// measure windows, simulation sites).
class CapacityError : public Error {
public:
    using Error::Error;
};

// Event with a timestamp earlier than the engine clock.
class OrderingError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

// Event/configuration disagreement seen by an observer.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

// Manifest validation failure carrying every violation found.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations)
        : Error(join(violations)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out;
        for (const auto& s : v) {
            if (!out.empty()) out += "; ";
            out += s;
        }
        return out;
    }

    std::vector<std::string> violations_;
};

} // namespace ffp
