#pragma once

// Trace CSV:  t_s,dT_K,power_W,phase   (phase is "heating" or "cooling").

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "qubdoe/error.hpp"
#include "qubdoe/qub.hpp"

namespace qubdoe {

inline constexpr const char* kTraceHeader = "t_s,dT_K,power_W,phase";

inline std::string format_trace(const QubTrace& trace) {
    std::string out = kTraceHeader;
    out += '\n';
    char buf[96];
    for (std::size_t k = 0; k < trace.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,", trace.times[k], trace.delta_T[k], trace.power[k]);
        out += buf;
        out += to_string(trace.phase[k]);
        out += '\n';
    }
    return out;
}

namespace detail {

inline double parse_field(const std::string& s, std::size_t line, const char* column) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v))
        throw InputError("trace line " + std::to_string(line) + ": bad " + column + " '" + s + "'");
    return v;
}

}  // namespace detail

inline QubTrace parse_trace(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw InputError("trace: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTraceHeader) throw InputError(std::string("trace: header must be '") + kTraceHeader + "'");
    QubTrace trace;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string f[4];
        std::size_t start = 0;
        for (int i = 0; i < 4; ++i) {
            const auto comma = line.find(',', start);
            if ((i < 3) != (comma != std::string::npos))
                throw InputError("trace line " + std::to_string(n) + ": expected 4 fields");
            f[i] = line.substr(start, i < 3 ? comma - start : std::string::npos);
            start = comma + 1;
        }
        trace.times.push_back(detail::parse_field(f[0], n, "t_s"));
        trace.delta_T.push_back(detail::parse_field(f[1], n, "dT_K"));
        trace.power.push_back(detail::parse_field(f[2], n, "power_W"));
        if (f[3] == "heating")
            trace.phase.push_back(Phase::heating);
        else if (f[3] == "cooling")
            trace.phase.push_back(Phase::cooling);
        else
            throw InputError("trace line " + std::to_string(n) + ": phase must be heating or cooling");
    }
    trace.validate();
    return trace;
}

inline QubTrace load_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read trace file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_trace(ss.str());
}

}  // namespace qubdoe
