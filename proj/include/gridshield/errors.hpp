#pragma once

#include <stdexcept>
#include <string>

namespace gridshield {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown by the Newton-Raphson solver; carries the last mismatch so callers
// can report how far from a solution the iteration stalled.
struct ConvergenceError : std::runtime_error {
    double final_mismatch;
    int iterations;
    ConvergenceError(const std::string& msg, double mismatch, int iters)
        : std::runtime_error(msg), final_mismatch(mismatch), iterations(iters) {}
};

struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StageError : std::runtime_error {
    std::string stage;
    StageError(const std::string& stage_name, const std::string& msg)
        : std::runtime_error("stage '" + stage_name + "' failed: " + msg), stage(stage_name) {}
};

}  // namespace gridshield
