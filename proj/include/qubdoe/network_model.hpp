#pragma once

// RC thermal circuits: validation, nodal assembly, steady state and reduction
// to a state-space model.
//
// Sign conventions. A branch runs from `from` to `to`; its heat flow is
//     q = G (θ_from − θ_to + b)
// where b is the branch temperature source (zero when absent) and θ_REF = 0.
// The node balance is  C θ' = −AᵀGA θ + AᵀG b + f  with A the branch×node
// incidence matrix (+1 at `to`, −1 at `from`). A branch REF→n carrying source
// "T_o" therefore ties node n to the outdoor temperature T_o.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "qubdoe/error.hpp"
#include "qubdoe/state_space.hpp"

namespace qubdoe {

inline constexpr std::string_view kReferenceNode = "REF";

struct Node {
    std::string id;
    double capacity = 0.0;  // J/K
    friend bool operator==(const Node&, const Node&) = default;
};

struct Branch {
    std::string id;
    std::string from;  // node id or "REF"
    std::string to;    // node id
    double conductance = 0.0;  // W/K
    std::optional<std::string> temperature_source;
    friend bool operator==(const Branch&, const Branch&) = default;
};

struct FlowSource {
    std::string node;
    std::string source_name;
    friend bool operator==(const FlowSource&, const FlowSource&) = default;
};

struct Zone {
    std::string id;
    std::string air_node;
    double floor_area = 0.0;  // m²
    double air_mass = 0.0;    // kg
    friend bool operator==(const Zone&, const Zone&) = default;
};

struct ThermalCircuit {
    std::vector<Node> nodes;
    std::vector<Branch> branches;
    std::vector<FlowSource> flow_sources;
    std::vector<Zone> zones;

    friend bool operator==(const ThermalCircuit&, const ThermalCircuit&) = default;

    std::optional<std::size_t> node_index(std::string_view id) const {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].id == id) return i;
        return std::nullopt;
    }

    // Distinct temperature source names in order of first declaration.
    std::vector<std::string> temperature_sources() const {
        std::vector<std::string> names;
        for (const auto& b : branches)
            if (b.temperature_source &&
                std::find(names.begin(), names.end(), *b.temperature_source) == names.end())
                names.push_back(*b.temperature_source);
        return names;
    }

    std::vector<std::string> flow_source_names() const {
        std::vector<std::string> names;
        for (const auto& f : flow_sources) names.push_back(f.source_name);
        return names;
    }

    // Input ordering contract: temperature sources, then flow sources, each in
    // declaration order.
    std::vector<std::string> input_names() const {
        auto names = temperature_sources();
        for (const auto& f : flow_sources) names.push_back(f.source_name);
        return names;
    }
};

namespace detail {

struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

// Groups of nodes with no conductive path to REF (empty for a grounded circuit).
// Node index nodes.size() stands for REF.
inline std::vector<std::vector<std::string>> floating_components(const ThermalCircuit& circuit) {
    const std::size_t n = circuit.nodes.size();
    DisjointSets sets(n + 1);
    for (const auto& b : circuit.branches) {
        const auto to = circuit.node_index(b.to);
        const auto from = b.from == kReferenceNode ? std::optional<std::size_t>(n)
                                                   : circuit.node_index(b.from);
        if (to && from) sets.unite(*to, *from);
    }
    std::map<std::size_t, std::vector<std::string>> groups;
    const std::size_t ref_root = sets.find(n);
    for (std::size_t i = 0; i < n; ++i)
        if (sets.find(i) != ref_root) groups[sets.find(i)].push_back(circuit.nodes[i].id);
    std::vector<std::vector<std::string>> out;
    for (auto& [root, members] : groups) out.push_back(std::move(members));
    return out;
}

inline std::string join(const std::vector<std::string>& items) {
    std::string s;
    for (const auto& item : items) s += (s.empty() ? "" : ", ") + item;
    return s;
}

}  // namespace detail

// Throws InputError naming the offending path (e.g. "branches[3].to").
inline void validate(const ThermalCircuit& circuit) {
    const auto at = [](const char* list, std::size_t i, const char* field) {
        return std::string(list) + "[" + std::to_string(i) + "]." + field;
    };

    if (circuit.nodes.empty()) throw InputError("nodes: at least one node is required");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < circuit.nodes.size(); ++i) {
        const auto& node = circuit.nodes[i];
        if (node.id.empty()) throw InputError(at("nodes", i, "id") + ": empty id");
        if (node.id == kReferenceNode)
            throw InputError(at("nodes", i, "id") + ": 'REF' is reserved for the reference node");
        if (!ids.insert(node.id).second)
            throw InputError(at("nodes", i, "id") + ": duplicate node id '" + node.id + "'");
        if (!std::isfinite(node.capacity) || node.capacity < 0.0)
            throw InputError(at("nodes", i, "capacity") + ": capacity of '" + node.id +
                             "' must be finite and >= 0");
    }

    std::set<std::string> branch_ids;
    bool touches_ref = false;
    for (std::size_t i = 0; i < circuit.branches.size(); ++i) {
        const auto& b = circuit.branches[i];
        if (b.id.empty()) throw InputError(at("branches", i, "id") + ": empty id");
        if (!branch_ids.insert(b.id).second)
            throw InputError(at("branches", i, "id") + ": duplicate branch id '" + b.id + "'");
        if (b.from != kReferenceNode && !circuit.node_index(b.from))
            throw InputError(at("branches", i, "from") + ": unknown node '" + b.from + "'");
        if (!circuit.node_index(b.to))
            throw InputError(at("branches", i, "to") + ": unknown node '" + b.to + "'");
        if (b.from == b.to)
            throw InputError(at("branches", i, "to") + ": branch '" + b.id + "' is a self-loop");
        if (!std::isfinite(b.conductance) || b.conductance <= 0.0)
            throw InputError(at("branches", i, "conductance") + ": conductance of '" + b.id +
                             "' must be finite and > 0");
        if (b.temperature_source && b.temperature_source->empty())
            throw InputError(at("branches", i, "temperature_source") + ": empty source name");
        touches_ref = touches_ref || b.from == kReferenceNode;
    }
    if (!touches_ref) throw InputError("branches: no branch touches REF; steady state is undefined");

    const auto temperature_names = circuit.temperature_sources();
    std::set<std::string> flow_names;
    for (std::size_t i = 0; i < circuit.flow_sources.size(); ++i) {
        const auto& f = circuit.flow_sources[i];
        if (!circuit.node_index(f.node))
            throw InputError(at("flow_sources", i, "node") + ": unknown node '" + f.node + "'");
        if (f.source_name.empty())
            throw InputError(at("flow_sources", i, "source_name") + ": empty source name");
        if (!flow_names.insert(f.source_name).second)
            throw InputError(at("flow_sources", i, "source_name") + ": duplicate flow source '" +
                             f.source_name + "'");
        if (std::find(temperature_names.begin(), temperature_names.end(), f.source_name) !=
            temperature_names.end())
            throw InputError(at("flow_sources", i, "source_name") + ": '" + f.source_name +
                             "' is already a temperature source");
    }

    std::set<std::string> zone_ids, air_nodes;
    for (std::size_t i = 0; i < circuit.zones.size(); ++i) {
        const auto& z = circuit.zones[i];
        if (z.id.empty() || !zone_ids.insert(z.id).second)
            throw InputError(at("zones", i, "id") + ": empty or duplicate zone id '" + z.id + "'");
        const auto node = circuit.node_index(z.air_node);
        if (!node)
            throw InputError(at("zones", i, "air_node") + ": unknown node '" + z.air_node + "'");
        if (!air_nodes.insert(z.air_node).second)
            throw InputError(at("zones", i, "air_node") + ": node '" + z.air_node +
                             "' is the air node of more than one zone");
        if (circuit.nodes[*node].capacity <= 0.0)
            throw InputError(at("zones", i, "air_node") + ": air node '" + z.air_node +
                             "' must have a positive capacity");
        if (!std::isfinite(z.floor_area) || z.floor_area <= 0.0)
            throw InputError(at("zones", i, "floor_area") + ": must be > 0");
        if (!std::isfinite(z.air_mass) || z.air_mass <= 0.0)
            throw InputError(at("zones", i, "air_mass") + ": must be > 0");
    }

    const auto floating = detail::floating_components(circuit);
    if (!floating.empty())
        throw InputError("branches: nodes without a conductive path to REF: " +
                         detail::join(floating.front()));
}

// Nodal form  K θ = F u  (steady) and  diag(capacity) θ' = −K θ + F u.
struct NodalSystem {
    Eigen::MatrixXd conductance;  // K = AᵀGA over the non-reference nodes
    Eigen::MatrixXd input_map;    // F, with F u = AᵀG b + f
    Eigen::VectorXd capacity;
    std::vector<std::string> node_ids;
    std::vector<std::string> input_names;
    std::vector<std::string> temperature_inputs;
    std::vector<std::string> flow_inputs;
};

inline NodalSystem assemble(const ThermalCircuit& circuit) {
    NodalSystem sys;
    const auto n = static_cast<Eigen::Index>(circuit.nodes.size());
    sys.temperature_inputs = circuit.temperature_sources();
    sys.flow_inputs = circuit.flow_source_names();
    sys.input_names = circuit.input_names();
    const auto n_u = static_cast<Eigen::Index>(sys.input_names.size());
    sys.conductance = Eigen::MatrixXd::Zero(n, n);
    sys.input_map = Eigen::MatrixXd::Zero(n, n_u);
    sys.capacity.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        sys.node_ids.push_back(circuit.nodes[i].id);
        sys.capacity(i) = circuit.nodes[i].capacity;
    }
    const auto input_of = [&](const std::string& name) {
        return static_cast<Eigen::Index>(
            std::find(sys.input_names.begin(), sys.input_names.end(), name) -
            sys.input_names.begin());
    };

    for (const auto& b : circuit.branches) {
        const auto to = static_cast<Eigen::Index>(*circuit.node_index(b.to));
        const double g = b.conductance;
        sys.conductance(to, to) += g;
        std::optional<Eigen::Index> from;
        if (b.from != kReferenceNode) {
            from = static_cast<Eigen::Index>(*circuit.node_index(b.from));
            sys.conductance(*from, *from) += g;
            sys.conductance(*from, to) -= g;
            sys.conductance(to, *from) -= g;
        }
        if (b.temperature_source) {
            const auto j = input_of(*b.temperature_source);
            sys.input_map(to, j) += g;
            if (from) sys.input_map(*from, j) -= g;
        }
    }
    for (const auto& f : circuit.flow_sources)
        sys.input_map(static_cast<Eigen::Index>(*circuit.node_index(f.node)),
                      input_of(f.source_name)) += 1.0;
    return sys;
}

inline Eigen::VectorXd input_vector(const std::vector<std::string>& input_names,
                                    const std::map<std::string, double>& values) {
    Eigen::VectorXd u(static_cast<Eigen::Index>(input_names.size()));
    for (std::size_t j = 0; j < input_names.size(); ++j) {
        const auto it = values.find(input_names[j]);
        if (it == values.end())
            throw InputError("no value assigned to source '" + input_names[j] + "'");
        u(static_cast<Eigen::Index>(j)) = it->second;
    }
    return u;
}

// Node temperatures (°C) solving 0 = −AᵀGAθ + AᵀGb + f.
inline std::map<std::string, double> steady_state(const ThermalCircuit& circuit,
                                                  const std::map<std::string, double>& source_values) {
    const auto floating = detail::floating_components(circuit);
    if (!floating.empty())
        throw NumericalError("singular nodal system; disconnected from REF: " +
                             detail::join(floating.front()));
    const auto sys = assemble(circuit);
    const Eigen::VectorXd u = input_vector(sys.input_names, source_values);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(sys.conductance);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericalError("nodal conductance matrix is not positive definite");
    const Eigen::VectorXd theta = ldlt.solve(sys.input_map * u);
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < sys.node_ids.size(); ++i)
        out[sys.node_ids[i]] = theta(static_cast<Eigen::Index>(i));
    return out;
}

namespace detail {

// Partition of node indices into capacitive (states) and massless nodes.
struct NodePartition {
    std::vector<Eigen::Index> states;
    std::vector<Eigen::Index> massless;
};

inline NodePartition partition(const NodalSystem& sys) {
    NodePartition p;
    for (Eigen::Index i = 0; i < sys.capacity.size(); ++i)
        (sys.capacity(i) > 0.0 ? p.states : p.massless).push_back(i);
    return p;
}

inline Eigen::MatrixXd rows_cols(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows,
                                 const std::vector<Eigen::Index>& cols) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(rows[r], cols[c]);
    return out;
}

inline Eigen::MatrixXd rows_of(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
    return out;
}

}  // namespace detail

// States are the capacitive nodes; massless nodes are eliminated by a Schur
// complement of the nodal conductance matrix. Outputs are node ids.
inline StateSpaceModel to_state_space(const ThermalCircuit& circuit,
                                      const std::vector<std::string>& outputs) {
    const auto sys = assemble(circuit);
    const auto part = detail::partition(sys);
    if (part.states.empty()) throw InputError("circuit has no capacitive node; no dynamic states");
    for (const auto& id : outputs)
        if (!circuit.node_index(id)) throw InputError("requested output '" + id + "' is not a node");

    const auto& s = part.states;
    const auto& z = part.massless;
    const Eigen::MatrixXd K_ss = detail::rows_cols(sys.conductance, s, s);
    const Eigen::MatrixXd F_s = detail::rows_of(sys.input_map, s);

    // θ_z = M θ_s + N u  from  0 = −K_zs θ_s − K_zz θ_z + F_z u
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(z.size()), K_ss.cols());
    Eigen::MatrixXd N = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(z.size()), sys.input_map.cols());
    Eigen::MatrixXd K_red = K_ss;
    Eigen::MatrixXd F_red = F_s;
    if (!z.empty()) {
        const Eigen::MatrixXd K_zz = detail::rows_cols(sys.conductance, z, z);
        const Eigen::MatrixXd K_zs = detail::rows_cols(sys.conductance, z, s);
        const Eigen::MatrixXd F_z = detail::rows_of(sys.input_map, z);
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(K_zz);
        const double scale = K_zz.diagonal().maxCoeff();
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
            ldlt.vectorD().minCoeff() <= 1e-13 * scale) {
            std::vector<std::string> names;
            for (auto i : z) names.push_back(sys.node_ids[static_cast<std::size_t>(i)]);
            throw NumericalError("massless-node block is singular (no conductive path out of "
                                 "zero-capacity subgraph): " + detail::join(names));
        }
        M = -ldlt.solve(K_zs);
        N = ldlt.solve(F_z);
        K_red = K_ss + K_zs.transpose() * M;  // K_ss − K_sz K_zz⁻¹ K_zs
        F_red = F_s - K_zs.transpose() * N;   // F_s − K_sz K_zz⁻¹ F_z
        K_red = 0.5 * (K_red + K_red.transpose());
    }

    StateSpaceModel model;
    Eigen::VectorXd cap(static_cast<Eigen::Index>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) cap(static_cast<Eigen::Index>(i)) = sys.capacity(s[i]);
    const Eigen::VectorXd inv_cap = cap.cwiseInverse();
    model.A = -(inv_cap.asDiagonal() * K_red);
    model.B = inv_cap.asDiagonal() * F_red;
    model.C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(outputs.size()), model.A.cols());
    model.D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(outputs.size()), model.B.cols());
    for (std::size_t o = 0; o < outputs.size(); ++o) {
        const auto node = static_cast<Eigen::Index>(*circuit.node_index(outputs[o]));
        const auto row = static_cast<Eigen::Index>(o);
        if (auto it = std::find(s.begin(), s.end(), node); it != s.end()) {
            model.C(row, it - s.begin()) = 1.0;
        } else {
            const auto k = std::find(z.begin(), z.end(), node) - z.begin();
            model.C.row(row) = M.row(k);
            model.D.row(row) = N.row(k);
        }
    }
    for (auto i : s) model.state_names.push_back(sys.node_ids[static_cast<std::size_t>(i)]);
    model.input_names = sys.input_names;
    model.output_names = outputs;
    model.temperature_inputs = sys.temperature_inputs;
    model.flow_inputs = sys.flow_inputs;
    model.state_capacities = cap;
    model.validate();
    return model;
}

// Steady conductance matrix seen from the given nodes (all other nodes
// eliminated, every temperature source at the zero reference):  K_eff θ = f.
inline Eigen::MatrixXd reduced_conductance(const ThermalCircuit& circuit,
                                           const std::vector<std::string>& keep) {
    const auto sys = assemble(circuit);
    std::vector<Eigen::Index> k, e;
    for (const auto& id : keep) {
        const auto idx = circuit.node_index(id);
        if (!idx) throw InputError("unknown node '" + id + "'");
        k.push_back(static_cast<Eigen::Index>(*idx));
    }
    for (Eigen::Index i = 0; i < sys.conductance.rows(); ++i)
        if (std::find(k.begin(), k.end(), i) == k.end()) e.push_back(i);
    Eigen::MatrixXd K_kk = detail::rows_cols(sys.conductance, k, k);
    if (e.empty()) return K_kk;
    const Eigen::MatrixXd K_ee = detail::rows_cols(sys.conductance, e, e);
    const Eigen::MatrixXd K_ek = detail::rows_cols(sys.conductance, e, k);
    return K_kk - K_ek.transpose() * Eigen::LDLT<Eigen::MatrixXd>(K_ee).solve(K_ek);
}

// Infiltration or ventilation as an equivalent conductance  ρ·c·V·n/3600  (W/K).
inline double air_change_conductance(double volume_m3, double air_changes_per_hour,
                                     double density = 1.2, double specific_heat = 1000.0) {
    return density * specific_heat * volume_m3 * air_changes_per_hour / 3600.0;
}

}  // namespace qubdoe
