#pragma once

#include <stdexcept>
#include <string>

namespace qubdoe {

// Malformed or inconsistent input data (documents, traces, arguments).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure: singular systems, ill-conditioned eigenbases, degenerate experiments.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Degenerate QUB experiment (vanishing estimator denominator). The DOE sweep
// flags these per cell instead of aborting.
class DegenerateExperiment : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// No grid cell satisfies the design constraints.
class InfeasibleDesign : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace qubdoe
