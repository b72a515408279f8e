#pragma once

// Reference heat transfer coefficients that a QUB estimate is judged against.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qubdoe/error.hpp"
#include "qubdoe/network_model.hpp"
#include "qubdoe/state_space.hpp"

namespace qubdoe {

// K = −C A⁻¹ B + D; column j is the steady response to u_j = 1, others 0.
inline Eigen::MatrixXd static_gains(const StateSpaceModel& model) {
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(model.A);
    if (!lu.isInvertible()) throw NumericalError("state matrix A is singular; no static gain");
    return -model.C * lu.solve(model.B) + model.D;
}

// H = 1/K_P, the reciprocal of the power gain on the indoor output.
inline double reference_H_single(const StateSpaceModel& model, const std::string& power_input,
                                 const std::string& output) {
    if (!model.is_flow_input(power_input))
        throw InputError("'" + power_input + "' is not a flow (power) input");
    const auto K = static_gains(model);
    const double gain = K(static_cast<Eigen::Index>(model.output_index(output)),
                          static_cast<Eigen::Index>(model.input_index(power_input)));
    if (!(std::abs(gain) > 0.0))
        throw NumericalError("output '" + output + "' is decoupled from '" + power_input + "'");
    return 1.0 / gain;
}

enum class ZoneWeighting { mass, area };

inline double mean_zone_temperature(const std::vector<Zone>& zones,
                                    const std::map<std::string, double>& temperatures,
                                    ZoneWeighting weighting = ZoneWeighting::mass) {
    if (zones.empty()) throw InputError("no zones given");
    double num = 0.0, den = 0.0;
    for (const auto& z : zones) {
        const auto it = temperatures.find(z.id);
        if (it == temperatures.end()) throw InputError("missing temperature for zone '" + z.id + "'");
        const double w = weighting == ZoneWeighting::mass ? z.air_mass : z.floor_area;
        if (!(w > 0.0)) throw InputError("non-positive weight for zone '" + z.id + "'");
        num += w * it->second;
        den += w;
    }
    return num / den;
}

// Flow source feeding the air node of each zone ("" when the zone has none).
inline std::map<std::string, std::string> zone_power_inputs(const ThermalCircuit& circuit) {
    std::map<std::string, std::string> out;
    for (const auto& z : circuit.zones) {
        out[z.id] = "";
        for (const auto& f : circuit.flow_sources)
            if (f.node == z.air_node) {
                out[z.id] = f.source_name;
                break;
            }
    }
    return out;
}

// H = ΣP_i / (θ̄ − T_o), θ_i from the steady output under all temperature
// inputs at T_o and zone powers on the zone air nodes, θ̄ mass-weighted.
inline double overall_H_multizone(const StateSpaceModel& model,
                                  const std::map<std::string, double>& powers, double T_o,
                                  const ThermalCircuit& circuit) {
    const auto power_inputs = zone_power_inputs(circuit);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(model.B.cols());
    for (const auto& name : model.temperature_inputs)
        u(static_cast<Eigen::Index>(model.input_index(name))) = T_o;
    double total = 0.0;
    for (const auto& [zone, p] : powers) {
        const auto it = power_inputs.find(zone);
        if (it == power_inputs.end()) throw InputError("unknown zone '" + zone + "'");
        if (p != 0.0 && it->second.empty())
            throw InputError("zone '" + zone + "' has no flow source on its air node");
        if (!it->second.empty()) u(static_cast<Eigen::Index>(model.input_index(it->second))) += p;
        total += p;
    }
    const Eigen::VectorXd y = static_gains(model) * u;
    std::map<std::string, double> theta;
    for (const auto& z : circuit.zones)
        theta[z.id] = y(static_cast<Eigen::Index>(model.output_index(z.air_node)));
    const double mean = mean_zone_temperature(circuit.zones, theta, ZoneWeighting::mass);
    const double dT = mean - T_o;
    if (!(std::abs(dT) > 1e-12 * (std::abs(mean) + std::abs(T_o) + 1.0)))
        throw NumericalError("mean indoor temperature equals T_o; H is undefined");
    return total / dT;
}

// Two-zone nodal form (T_o as zero reference):
//   H = [(K11+K12)θ1 + (K12+K22)θ2] / [(m1θ1 + m2θ2)/(m1+m2)]
inline double H_from_K(const Eigen::Matrix2d& K, const std::array<double, 2>& masses,
                       const std::array<double, 2>& temperatures) {
    const auto [m1, m2] = masses;
    const auto [t1, t2] = temperatures;
    const double mean = (m1 * t1 + m2 * t2) / (m1 + m2);
    if (!(std::abs(mean) > 0.0)) throw NumericalError("zero mean temperature; H is undefined");
    return ((K(0, 0) + K(0, 1)) * t1 + (K(0, 1) + K(1, 1)) * t2) / mean;
}

// Element-wise multizone conductance, as printed in the source formulation:
//   H = (Σ U_iA_i θ_i)·(Σ m_i)/(Σ m_i θ_i).
// Known to be inconsistent for coupled elements; diagnostic use only.
inline double elementwise_H(std::span<const double> ua, std::span<const double> theta,
                            std::span<const double> mass) {
    if (ua.size() != theta.size() || ua.size() != mass.size() || ua.empty())
        throw InputError("elementwise_H: inputs must be non-empty and of equal length");
    double s_uat = 0.0, s_m = 0.0, s_mt = 0.0;
    for (std::size_t i = 0; i < ua.size(); ++i) {
        s_uat += ua[i] * theta[i];
        s_m += mass[i];
        s_mt += mass[i] * theta[i];
    }
    if (!(std::abs(s_mt) > 0.0)) throw NumericalError("elementwise_H: zero denominator");
    return s_uat * s_m / s_mt;
}

// Degree-hour estimate H = ∫P dt / ∫ΔT dt, trapezoidal on the given grid.
inline double degree_day_H(std::span<const double> times, std::span<const double> power,
                           std::span<const double> delta_T) {
    if (times.size() != power.size() || times.size() != delta_T.size() || times.size() < 2)
        throw InputError("degree_day_H: series must share at least two timestamps");
    double e = 0.0, dd = 0.0;
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double h = times[k] - times[k - 1];
        if (!(h > 0.0)) throw InputError("degree_day_H: timestamps must be strictly increasing");
        e += 0.5 * h * (power[k] + power[k - 1]);
        dd += 0.5 * h * (delta_T[k] + delta_T[k - 1]);
    }
    if (!(std::abs(dd) > 0.0)) throw NumericalError("degree_day_H: zero temperature-difference integral");
    return e / dd;
}

inline double areal_H(double H, double area) {
    if (!(area > 0.0)) throw InputError("areal_H: area must be > 0");
    return H / area;
}

struct ConductanceReport {
    double H = 0.0;       // W/K
    double R = 0.0;       // K/W
    double areal_H = 0.0; // W/(m²K), NaN when no area is given
    Eigen::MatrixXd static_gain_matrix;
    Eigen::VectorXd temperature_gain_sums;  // per output
    std::vector<std::string> output_names;
    std::vector<std::string> input_names;
};

inline ConductanceReport conductance_report(const StateSpaceModel& model, const std::string& power_input,
                                            const std::string& output, double area = 0.0) {
    ConductanceReport r;
    r.static_gain_matrix = static_gains(model);
    r.output_names = model.output_names;
    r.input_names = model.input_names;
    r.temperature_gain_sums = Eigen::VectorXd::Zero(model.C.rows());
    for (const auto& name : model.temperature_inputs)
        r.temperature_gain_sums += r.static_gain_matrix.col(static_cast<Eigen::Index>(model.input_index(name)));
    r.H = reference_H_single(model, power_input, output);
    r.R = 1.0 / r.H;
    r.areal_H = area > 0.0 ? areal_H(r.H, area) : std::numeric_limits<double>::quiet_NaN();
    return r;
}

}  // namespace qubdoe
