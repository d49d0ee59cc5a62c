#ifndef ECHOSIM_ERRORS_HPP
#define ECHOSIM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace echosim {

// Invalid input or configuration.  The message must name the offending
// field, flag or file so the CLI can surface it verbatim (exit code 1).
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A numerical routine failed to converge within its budget (exit code 2).
class convergence_error : public std::runtime_error {
public:
    explicit convergence_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace echosim

#endif
