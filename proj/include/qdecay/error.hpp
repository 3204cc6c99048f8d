#pragma once

#include <stdexcept>
#include <string>

namespace qdecay {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument or state outside the documented domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A dense internal-coupling matrix was requested above the configured size limit.
class MemoryGuardError : public Error {
public:
    MemoryGuardError(std::size_t requested, std::size_t limit)
        : Error("dense internal-coupling matrix refused: N = " + std::to_string(requested) +
                " exceeds the memory guard limit " + std::to_string(limit)),
          requested_(requested), limit_(limit) {}

    std::size_t requested() const noexcept { return requested_; }
    std::size_t limit() const noexcept { return limit_; }

private:
    std::size_t requested_;
    std::size_t limit_;
};

/// Time step above the RK4 stability bound of the propagation matrix.
class StabilityError : public Error {
public:
    StabilityError(double dt, double bound)
        : Error("time step dt = " + std::to_string(dt) + " violates the RK4 stability bound " +
                std::to_string(bound)),
          dt_(dt), bound_(bound) {}

    double dt() const noexcept { return dt_; }
    double bound() const noexcept { return bound_; }

private:
    double dt_;
    double bound_;
};

/// The squared norm drifted beyond the abort threshold during propagation.
class NormDriftError : public Error {
public:
    NormDriftError(double t, double drift, double threshold)
        : Error("norm drift " + std::to_string(drift) + " at t = " + std::to_string(t) +
                " exceeds abort threshold " + std::to_string(threshold)),
          t_(t), drift_(drift) {}

    double time() const noexcept { return t_; }
    double drift() const noexcept { return drift_; }

private:
    double t_;
    double drift_;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace qdecay
