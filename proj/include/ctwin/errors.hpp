#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctwin {

/// Base for every error raised by the library. The exit code is what the CLI
/// returns when the error escapes a command.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, int exit_code = 4)
        : std::runtime_error(what), exit_code_(exit_code) {}
    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

/// Invalid graph, configuration or arguments.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(what, 1) {}
};

/// Malformed or unusable input data.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what, 2) {}
};

/// Learner weights became non-finite.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : Error(what, 3), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace ctwin
