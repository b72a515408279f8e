#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "qubdoe/error.hpp"

namespace qubdoe {

// Continuous LTI model  x' = A x + B u,  y = C x + D u  (SI units, time in s).
struct StateSpaceModel {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd C;
    Eigen::MatrixXd D;
    std::vector<std::string> state_names;
    std::vector<std::string> input_names;
    std::vector<std::string> output_names;
    std::vector<std::string> temperature_inputs;  // subset of input_names
    std::vector<std::string> flow_inputs;         // subset of input_names

    // Heat capacities of the states, J/K. When present, diag(c)·A is symmetric,
    // which lets the eigen solver work on a symmetric similar matrix.
    Eigen::VectorXd state_capacities;

    std::size_t num_states() const { return static_cast<std::size_t>(A.rows()); }
    std::size_t num_inputs() const { return static_cast<std::size_t>(B.cols()); }
    std::size_t num_outputs() const { return static_cast<std::size_t>(C.rows()); }

    std::size_t input_index(std::string_view name) const { return find(input_names, name, "input"); }
    std::size_t output_index(std::string_view name) const { return find(output_names, name, "output"); }

    bool is_temperature_input(std::string_view name) const {
        return std::find(temperature_inputs.begin(), temperature_inputs.end(), name) !=
               temperature_inputs.end();
    }
    bool is_flow_input(std::string_view name) const {
        return std::find(flow_inputs.begin(), flow_inputs.end(), name) != flow_inputs.end();
    }

    void validate() const {
        const auto n = A.rows();
        if (A.cols() != n) throw InputError("state matrix A is not square");
        if (B.rows() != n || C.cols() != n) throw InputError("B/C dimensions do not match A");
        if (D.rows() != C.rows() || D.cols() != B.cols())
            throw InputError("feedthrough D dimensions do not match C and B");
        if (state_names.size() != static_cast<std::size_t>(n) ||
            input_names.size() != static_cast<std::size_t>(B.cols()) ||
            output_names.size() != static_cast<std::size_t>(C.rows()))
            throw InputError("label lists do not match model dimensions");
        for (const auto& name : input_names)
            if (!is_temperature_input(name) && !is_flow_input(name))
                throw InputError("input '" + name + "' is neither a temperature nor a flow source");
        if (state_capacities.size() != 0 && state_capacities.size() != n)
            throw InputError("state_capacities size does not match the number of states");
    }

private:
    static std::size_t find(const std::vector<std::string>& names, std::string_view name,
                            const char* what) {
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end())
            throw InputError(std::string("unknown ") + what + " '" + std::string(name) + "'");
        return static_cast<std::size_t>(it - names.begin());
    }
};

// Collapses the outputs to the single weighted output  y' = wᵀy. Weights are
// normalized to sum to one, so the result is a weighted mean (mass-weighted
// indoor temperature for multizone buildings).
inline StateSpaceModel with_weighted_output(const StateSpaceModel& model,
                                            const Eigen::VectorXd& weights,
                                            std::string name) {
    if (weights.size() != model.C.rows())
        throw InputError("output weight vector does not match the number of outputs");
    if ((weights.array() < 0.0).any() || weights.sum() <= 0.0)
        throw InputError("output weights must be non-negative with a positive sum");
    const Eigen::RowVectorXd w = weights.transpose() / weights.sum();
    StateSpaceModel out = model;
    out.C = w * model.C;
    out.D = w * model.D;
    out.output_names = {std::move(name)};
    return out;
}

}  // namespace qubdoe
