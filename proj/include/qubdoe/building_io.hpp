#pragma once

// JSON building description <-> ThermalCircuit.
//
//   { "nodes":        [{"id": "air", "capacity": 1.0e5}, ...],
//     "branches":     [{"id": "wall", "from": "REF", "to": "air",
//                       "conductance": 50.0, "temperature_source": "T_o"}, ...],
//     "flow_sources": [{"node": "air", "source_name": "P"}],
//     "zones":        [{"id": "z1", "air_node": "air", "floor_area": 13.5,
//                       "air_mass": 40.5}] }
//
// A zone may give "volume" (m³) instead of "air_mass"; the mass is then
// 1.2 kg/m³ × volume.

#include "json.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include "qubdoe/error.hpp"
#include "qubdoe/network_model.hpp"

namespace qubdoe {

inline constexpr double kAirDensity = 1.2;  // kg/m³

namespace detail {

using json = nlohmann::json;

inline const json& require(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) throw InputError(path + ": expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) throw InputError(path + "." + key + ": missing field");
    return *it;
}

inline std::string require_string(const json& obj, const char* key, const std::string& path) {
    const auto& v = require(obj, key, path);
    if (!v.is_string()) throw InputError(path + "." + key + ": expected a string");
    return v.get<std::string>();
}

inline double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw InputError(path + ": expected a number");
    return v.get<double>();
}

inline double require_number(const json& obj, const char* key, const std::string& path) {
    return as_number(require(obj, key, path), path + "." + key);
}

inline const json& require_array(const json& doc, const char* key) {
    const auto& v = require(doc, key, "$");
    if (!v.is_array()) throw InputError(std::string("$.") + key + ": expected an array");
    return v;
}

}  // namespace detail

inline ThermalCircuit parse_building(const std::string& text) {
    using detail::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("$: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw InputError("$: expected a JSON object");

    ThermalCircuit c;
    const auto& nodes = detail::require_array(doc, "nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string p = "$.nodes[" + std::to_string(i) + "]";
        c.nodes.push_back({detail::require_string(nodes[i], "id", p),
                           detail::require_number(nodes[i], "capacity", p)});
    }
    const auto& branches = detail::require_array(doc, "branches");
    for (std::size_t i = 0; i < branches.size(); ++i) {
        const std::string p = "$.branches[" + std::to_string(i) + "]";
        const auto& b = branches[i];
        Branch br{detail::require_string(b, "id", p), detail::require_string(b, "from", p),
                  detail::require_string(b, "to", p), detail::require_number(b, "conductance", p),
                  std::nullopt};
        if (const auto it = b.find("temperature_source"); it != b.end() && !it->is_null()) {
            if (!it->is_string()) throw InputError(p + ".temperature_source: expected a string");
            br.temperature_source = it->get<std::string>();
        }
        c.branches.push_back(std::move(br));
    }
    const auto& flows = detail::require_array(doc, "flow_sources");
    for (std::size_t i = 0; i < flows.size(); ++i) {
        const std::string p = "$.flow_sources[" + std::to_string(i) + "]";
        c.flow_sources.push_back({detail::require_string(flows[i], "node", p),
                                  detail::require_string(flows[i], "source_name", p)});
    }
    const auto& zones = detail::require_array(doc, "zones");
    for (std::size_t i = 0; i < zones.size(); ++i) {
        const std::string p = "$.zones[" + std::to_string(i) + "]";
        const auto& z = zones[i];
        Zone zone{detail::require_string(z, "id", p), detail::require_string(z, "air_node", p),
                  detail::require_number(z, "floor_area", p), 0.0};
        if (const auto it = z.find("air_mass"); it != z.end())
            zone.air_mass = detail::as_number(*it, p + ".air_mass");
        else if (const auto v = z.find("volume"); v != z.end())
            zone.air_mass = kAirDensity * detail::as_number(*v, p + ".volume");
        else
            throw InputError(p + ": one of 'air_mass' or 'volume' is required");
        c.zones.push_back(std::move(zone));
    }
    validate(c);
    return c;
}

inline ThermalCircuit load_building(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read building file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_building(ss.str());
}

inline std::string serialize_building(const ThermalCircuit& c) {
    using detail::json;
    json doc = json::object();
    doc["nodes"] = json::array();
    for (const auto& n : c.nodes) doc["nodes"].push_back({{"id", n.id}, {"capacity", n.capacity}});
    doc["branches"] = json::array();
    for (const auto& b : c.branches) {
        json jb = {{"id", b.id}, {"from", b.from}, {"to", b.to}, {"conductance", b.conductance}};
        if (b.temperature_source) jb["temperature_source"] = *b.temperature_source;
        doc["branches"].push_back(std::move(jb));
    }
    doc["flow_sources"] = json::array();
    for (const auto& f : c.flow_sources)
        doc["flow_sources"].push_back({{"node", f.node}, {"source_name", f.source_name}});
    doc["zones"] = json::array();
    for (const auto& z : c.zones)
        doc["zones"].push_back({{"id", z.id}, {"air_node", z.air_node},
                                {"floor_area", z.floor_area}, {"air_mass", z.air_mass}});
    return doc.dump(2) + "\n";
}

}  // namespace qubdoe
