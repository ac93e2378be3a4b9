#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gradalign {

// Exit-code mapping used by the CLI: UsageError -> 2, ValidationError -> 3,
// NumericalError -> 4.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingDivergedError : NumericalError {
    TrainingDivergedError(const std::string& msg, int last_epoch_, double accuracy_,
                          std::vector<double> curve_)
        : NumericalError(msg),
          last_epoch(last_epoch_),
          accuracy(accuracy_),
          curve(std::move(curve_)) {}

    int last_epoch;               // last epoch whose loss was still finite
    double accuracy;              // test accuracy at the last finite snapshot
    std::vector<double> curve;    // per-epoch training loss up to the divergence
};

struct DegenerateGeometryError : NumericalError {
    using NumericalError::NumericalError;
};

}  // namespace gradalign
