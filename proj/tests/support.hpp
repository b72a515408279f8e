#pragma once

// Reference implementations used as oracles by the tests. They deliberately
// avoid the library's own assembly and propagation code.

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "qubdoe/building_io.hpp"
#include "qubdoe/network_model.hpp"

namespace qubdoe::test {

inline std::string model_path(const std::string& name) { return std::string(QUBDOE_MODELS_DIR) + "/" + name; }

inline const std::vector<std::string>& bundled_models() {
    static const std::vector<std::string> names{"bungalow.json", "house.json", "ladder5.json"};
    return names;
}

// One capacitive node tied to REF through G, source T_o, heat input P.
inline ThermalCircuit first_order_circuit(double G, double C) {
    ThermalCircuit c;
    c.nodes = {{"air", C}};
    c.branches = {{"wall", "REF", "air", G, "T_o"}};
    c.flow_sources = {{"air", "P"}};
    c.zones = {{"zone", "air", 10.0, 30.0}};
    return c;
}

// Nodal equations built from the branch-node incidence matrix:
//   K = AᵀGA,  F u = AᵀG b(u) + f(u),  A(k, to) = +1, A(k, from) = −1.
struct DenseCircuit {
    Eigen::MatrixXd K;
    Eigen::MatrixXd F;  // columns follow `inputs`
    Eigen::VectorXd capacity;
    std::vector<std::string> nodes;
    std::vector<std::string> inputs;

    explicit DenseCircuit(const ThermalCircuit& c) {
        for (const auto& n : c.nodes) nodes.push_back(n.id);
        for (const auto& b : c.branches)
            if (b.temperature_source && std::find(inputs.begin(), inputs.end(), *b.temperature_source) == inputs.end())
                inputs.push_back(*b.temperature_source);
        for (const auto& f : c.flow_sources) inputs.push_back(f.source_name);
        const auto nn = static_cast<Eigen::Index>(nodes.size());
        const auto nb = static_cast<Eigen::Index>(c.branches.size());
        const auto nu = static_cast<Eigen::Index>(inputs.size());
        const auto node = [&](const std::string& id) {
            return static_cast<Eigen::Index>(std::find(nodes.begin(), nodes.end(), id) - nodes.begin());
        };
        const auto input = [&](const std::string& id) {
            return static_cast<Eigen::Index>(std::find(inputs.begin(), inputs.end(), id) - inputs.begin());
        };
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nb, nn);
        Eigen::VectorXd g(nb);
        Eigen::MatrixXd bmap = Eigen::MatrixXd::Zero(nb, nu);  // b = bmap·u
        Eigen::MatrixXd fmap = Eigen::MatrixXd::Zero(nn, nu);  // f = fmap·u
        for (Eigen::Index k = 0; k < nb; ++k) {
            const auto& b = c.branches[static_cast<std::size_t>(k)];
            A(k, node(b.to)) += 1.0;
            if (b.from != "REF") A(k, node(b.from)) -= 1.0;
            g(k) = b.conductance;
            if (b.temperature_source) bmap(k, input(*b.temperature_source)) = 1.0;
        }
        for (const auto& f : c.flow_sources) fmap(node(f.node), input(f.source_name)) += 1.0;
        K = A.transpose() * g.asDiagonal() * A;
        F = A.transpose() * g.asDiagonal() * bmap + fmap;
        capacity.resize(nn);
        for (Eigen::Index i = 0; i < nn; ++i) capacity(i) = c.nodes[static_cast<std::size_t>(i)].capacity;
    }

    Eigen::VectorXd steady(const Eigen::VectorXd& u) const { return K.fullPivLu().solve(F * u); }

    Eigen::Index index(const std::string& id) const {
        return static_cast<Eigen::Index>(std::find(nodes.begin(), nodes.end(), id) - nodes.begin());
    }
};

// Implicit Euler on the unreduced DAE  diag(c) θ' = −K θ + F u  (massless rows
// are algebraic). Returns node temperatures after each multiple of `every`
// steps, starting with θ0 itself.
inline std::vector<Eigen::VectorXd> implicit_euler(const DenseCircuit& dc, const Eigen::VectorXd& u,
                                                   const Eigen::VectorXd& theta0, double dt, std::size_t steps,
                                                   std::size_t every) {
    const Eigen::MatrixXd Cdt = (dc.capacity / dt).asDiagonal();
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(Cdt + dc.K);
    const Eigen::VectorXd Fu = dc.F * u;
    Eigen::VectorXd theta = theta0;
    std::vector<Eigen::VectorXd> out{theta};
    for (std::size_t k = 1; k <= steps; ++k) {
        theta = lu.solve(Cdt * theta + Fu);
        if (k % every == 0) out.push_back(theta);
    }
    return out;
}

inline double central_difference(const auto& f, double x, double h) { return (f(x + h) - f(x - h)) / (2.0 * h); }

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace qubdoe::test
