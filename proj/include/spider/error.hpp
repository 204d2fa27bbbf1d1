#pragma once

#include <stdexcept>
#include <string>

namespace spider {

// Exception categories map one-to-one onto CLI exit codes (2, 3, 4).

// Invalid input parameters or violated preconditions.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical tolerance was violated or an iteration did not converge.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File could not be read, written or parsed.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message)
{
    if (!condition) {
        throw ParameterError(message);
    }
}

}  // namespace spider
