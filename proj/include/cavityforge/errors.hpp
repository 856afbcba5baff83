#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cavityforge {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument is outside the domain where the operation is defined.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure did not reach its tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class LookupError : public Error {
public:
    using Error::Error;
};

/// A rendered patch would be smaller than the minimum usable size.
class TooSmallError : public Error {
public:
    using Error::Error;
};

class WarpError : public Error {
public:
    WarpError(const std::string& what, std::uint64_t seed) : Error(what), seed_(seed) {}
    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::uint64_t seed_;
};

/// The patch cannot be labeled (no detectable fringe, label does not fit).
class LabelError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual) : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class CompositionError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ManifestError : public Error {
public:
    ManifestError(const std::string& what, std::string entry)
        : Error(entry.empty() ? what : what + " [" + entry + "]"), entry_(std::move(entry)) {}
    const std::string& entry() const noexcept { return entry_; }

private:
    std::string entry_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace cavityforge
