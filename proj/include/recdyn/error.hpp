#ifndef RECDYN_ERROR_HPP
#define RECDYN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace recdyn {

/// Bad input: malformed arguments, unsupported requests, invalid maps.
/// The CLI maps it to exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical guard tripped (singular matrix, overflow, ill-conditioned
/// lattice, enumeration budget exceeded). The CLI maps it to exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace recdyn

#endif  // RECDYN_ERROR_HPP
