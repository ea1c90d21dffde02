#pragma once

#include <stdexcept>
#include <string>

namespace rbsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (wrong lengths, bad JSON, out-of-range fields).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An argument outside the domain of a closed-form expression.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Requested auxiliary voltage lies outside what the port can deliver.
class UnreachableError : public Error {
public:
    UnreachableError(double target, double band_lo, double band_hi)
        : Error("auxiliary target " + std::to_string(target) + " V outside achievable band [" +
                std::to_string(band_lo) + ", " + std::to_string(band_hi) + "] V"),
          target(target), band_lo(band_lo), band_hi(band_hi) {}

    double target;
    double band_lo;
    double band_hi;
};

/// Transformer-ratio bounds cross: no single ratio covers the module voltage range.
class InfeasibleDesignError : public Error {
public:
    InfeasibleDesignError(double lo, double hi)
        : Error("infeasible design: lower turns bound " + std::to_string(lo) +
                " exceeds upper bound " + std::to_string(hi)),
          lo(lo), hi(hi) {}

    double lo;
    double hi;
};

/// Numerical fault during time stepping.
class SimulationFault : public Error {
public:
    SimulationFault(const std::string& what, double t)
        : Error(what + " at t=" + std::to_string(t) + " s"), t(t) {}

    double t;
};

} // namespace rbsim
