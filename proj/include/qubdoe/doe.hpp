#pragma once

// Design of QUB experiments: sweep the (P_h, t_qub) plane, attach the error
// budget to each cell and pick the admissible cell with the smallest error.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "qubdoe/error.hpp"
#include "qubdoe/error_budget.hpp"
#include "qubdoe/qub.hpp"

namespace qubdoe {

// Per-cell measurement errors. eps_alpha defaults to the larger standard error
// of the two slope fits; eps_P is relative to P_h.
struct ErrorPolicy {
    double eps_dT = 0.5;      // K
    double eps_P_rel = 0.01;  // fraction of P_h
    std::optional<double> eps_alpha;  // K/s

    MeasurementErrors resolve(const QubEstimate& e) const {
        MeasurementErrors m;
        m.eps_dT = eps_dT;
        m.eps_P = eps_P_rel * e.P_h;
        m.eps_alpha = eps_alpha ? *eps_alpha : std::max(e.stderr_h, e.stderr_c);
        m.validate();
        return m;
    }
};

struct DesignConstraints {
    double max_power = std::numeric_limits<double>::infinity();               // W
    double max_indoor_temperature = std::numeric_limits<double>::infinity();  // °C
    double max_total_duration = std::numeric_limits<double>::infinity();      // s, both phases

    void validate() const {
        if (!(max_power > 0.0) || !(max_indoor_temperature > 0.0) || !(max_total_duration > 0.0))
            throw InputError("design constraints must be > 0");
    }
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct DoeCell {
    double ph = 0.0;     // W
    double t_qub = 0.0;  // s
    double H_qub = kNaN;
    double eps_qub = kNaN;
    double eps_qub_pct = kNaN;  // fraction
    double eps_Hm = kNaN;
    double eps_H = kNaN;
    double eps_H_pct = kNaN;    // fraction
    double theta_max = kNaN;    // °C
    bool valid = false;
    std::string flag;  // reason when not valid
};

struct DoeGrid {
    std::vector<double> ph_values;
    std::vector<double> t_values;
    std::vector<DoeCell> cells;  // t-major: cells[j * ph_values.size() + i]
    double H_ref = 0.0;

    const DoeCell& at(std::size_t i_ph, std::size_t j_t) const { return cells.at(j_t * ph_values.size() + i_ph); }
};

inline std::vector<double> linear_axis(double a, double b, std::size_t n) {
    if (n == 0) throw InputError("axis needs at least one point");
    if (n == 1) return {a};
    if (!(b > a)) throw InputError("axis end must exceed its start");
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
    return v;
}

inline std::vector<double> log_axis(double a, double b, std::size_t n) {
    if (!(a > 0.0)) throw InputError("log axis start must be > 0");
    auto v = linear_axis(std::log(a), std::log(b), n);
    for (auto& x : v) x = std::exp(x);
    v.front() = a;
    if (n > 1) v.back() = b;
    return v;
}

namespace detail {

inline void require_increasing(std::span<const double> axis, const char* name) {
    if (axis.empty()) throw InputError(std::string(name) + " axis is empty");
    for (std::size_t k = 0; k < axis.size(); ++k) {
        if (!std::isfinite(axis[k]) || !(axis[k] > 0.0))
            throw InputError(std::string(name) + " axis values must be finite and > 0");
        if (k > 0 && !(axis[k] > axis[k - 1])) throw InputError(std::string(name) + " axis must be strictly increasing");
    }
}

inline unsigned sweep_threads(std::size_t jobs) {
    unsigned n = 0;
    if (const char* env = std::getenv("QUBDOE_THREADS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 0) throw InputError("QUBDOE_THREADS must be a non-negative integer");
        n = static_cast<unsigned>(v);
    }
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

}  // namespace detail

// One cell of the sweep. Numerical trouble in the cell is reported in `flag`.
inline DoeCell evaluate_cell(const QubSimulator& sim, const QubProtocol& base, double ph, double t_qub,
                             const ErrorPolicy& policy, double H_ref) {
    DoeCell cell;
    cell.ph = ph;
    cell.t_qub = t_qub;
    QubProtocol p = base;
    p.heating_power = ph;
    p.duration = t_qub;
    p.sample_dt = std::min(base.sample_dt, t_qub / 20.0);
    try {
        const auto trace = sim.simulate(p);
        cell.theta_max = p.outdoor_temperature + *std::max_element(trace.delta_T.begin(), trace.delta_T.end());
        const auto est = estimate(trace, p.slope_window_fraction);
        if (!(est.alpha_h > 0.0) || !(est.alpha_c < 0.0)) {
            cell.flag = "ill-posed slopes";
            return cell;
        }
        const auto pd = partials(est.alpha_h, est.alpha_c, est.P_h, est.P_c, est.dT0_h, est.dT0_c);
        const auto b = error_budget(est.H_qub, H_ref, pd, policy.resolve(est));
        cell.H_qub = est.H_qub;
        cell.eps_qub = b.eps_qub;
        cell.eps_qub_pct = b.eps_qub_pct;
        cell.eps_Hm = b.eps_Hm;
        cell.eps_H = b.eps_H;
        cell.eps_H_pct = b.eps_H_pct;
        cell.valid = std::isfinite(b.eps_H_pct);
        if (!cell.valid) cell.flag = "non-finite error";
    } catch (const NumericalError& e) {
        cell.flag = e.what();
    }
    return cell;
}

// Cells are independent; they are computed on QUBDOE_THREADS workers (0 or
// unset = hardware concurrency) and stored by index, so the result does not
// depend on scheduling.
inline DoeGrid sweep(const QubSimulator& sim, const QubProtocol& base, std::span<const double> ph_axis,
                     std::span<const double> t_axis, const ErrorPolicy& policy, double H_ref) {
    detail::require_increasing(ph_axis, "P_h");
    detail::require_increasing(t_axis, "t_qub");
    if (!(H_ref > 0.0)) throw InputError("reference H must be > 0");
    if (!(policy.eps_dT >= 0.0) || !(policy.eps_P_rel >= 0.0) || (policy.eps_alpha && !(*policy.eps_alpha >= 0.0)))
        throw InputError("measurement errors must be >= 0");
    {
        QubProtocol probe = base;
        probe.heating_power = ph_axis.back();
        probe.duration = t_axis.front();
        probe.sample_dt = std::min(base.sample_dt, t_axis.front() / 20.0);
        probe.validate();
        (void)sim.inputs(base.outdoor_temperature, 0.0, base.boundary_temperatures);
    }

    DoeGrid grid;
    grid.ph_values.assign(ph_axis.begin(), ph_axis.end());
    grid.t_values.assign(t_axis.begin(), t_axis.end());
    grid.H_ref = H_ref;
    const std::size_t nph = ph_axis.size();
    const std::size_t total = nph * t_axis.size();
    grid.cells.resize(total);

    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t k = next++; k < total; k = next++)
            grid.cells[k] = evaluate_cell(sim, base, ph_axis[k % nph], t_axis[k / nph], policy, H_ref);
    };
    const unsigned n = detail::sweep_threads(total);
    std::vector<std::jthread> workers;
    for (unsigned w = 1; w < n; ++w) workers.emplace_back(work);
    work();
    workers.clear();
    return grid;
}

struct DesignPoint {
    double ph = 0.0;
    double t_qub = 0.0;
    double eps_H_pct = 0.0;  // fraction
    DoeCell cell;
};

inline bool admissible(const DoeCell& c, const DesignConstraints& k) {
    return c.valid && c.ph <= k.max_power && c.theta_max <= k.max_indoor_temperature &&
           2.0 * c.t_qub <= k.max_total_duration;
}

// Minimum |eps_H_pct|; ties go to the shorter, then the cheaper experiment.
inline DesignPoint select_optimum(const DoeGrid& grid, const DesignConstraints& constraints) {
    constraints.validate();
    const DoeCell* best = nullptr;
    for (const auto& c : grid.cells) {
        if (!admissible(c, constraints)) continue;
        if (!best) {
            best = &c;
            continue;
        }
        const double a = std::abs(c.eps_H_pct), b = std::abs(best->eps_H_pct);
        if (a < b || (a == b && (c.t_qub < best->t_qub || (c.t_qub == best->t_qub && c.ph < best->ph)))) best = &c;
    }
    if (best) return {best->ph, best->t_qub, best->eps_H_pct, *best};

    std::size_t valid = 0, power = 0, temp = 0, duration = 0;
    for (const auto& c : grid.cells) {
        if (!c.valid) continue;
        ++valid;
        power += c.ph <= constraints.max_power;
        temp += c.theta_max <= constraints.max_indoor_temperature;
        duration += 2.0 * c.t_qub <= constraints.max_total_duration;
    }
    std::string why;
    if (valid == 0)
        why = "no valid cell in the grid";
    else {
        std::vector<std::string> binding;
        if (power == 0) binding.emplace_back("max_power");
        if (temp == 0) binding.emplace_back("max_indoor_temperature");
        if (duration == 0) binding.emplace_back("max_total_duration");
        why = binding.empty() ? "no cell satisfies all constraints jointly"
                              : "binding constraint: " + detail::join(binding);
    }
    throw InfeasibleDesign("infeasible design: " + why);
}

// Power that holds the (weighted) indoor temperature at theta0 with the
// protocol's outdoor and boundary temperatures; equals H_ref·(theta0 − T_o)
// when T_o is the only boundary.
inline double maintenance_power(const QubSimulator& sim, const QubProtocol& protocol, double theta0) {
    return sim.holding_power(protocol.outdoor_temperature, theta0, protocol.boundary_temperatures);
}

namespace detail {

inline void append_number(std::string& out, double v) {
    if (!std::isfinite(v)) {
        out += "nan";
        return;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v == 0.0 ? 0.0 : v);
    out += buf;
}

}  // namespace detail

inline constexpr const char* kGridHeader =
    "ph_W,t_qub_s,H_qub_W_per_K,eps_qub_pct,eps_Hm_W_per_K,eps_H_pct,theta_max_C,valid";

// Percent columns are written in percent; rows are t-major.
inline std::string format_grid(const DoeGrid& grid) {
    std::string out = kGridHeader;
    out += '\n';
    for (const auto& c : grid.cells) {
        detail::append_number(out, c.ph);
        out += ',';
        detail::append_number(out, c.t_qub);
        out += ',';
        detail::append_number(out, c.H_qub);
        out += ',';
        detail::append_number(out, 100.0 * c.eps_qub_pct);
        out += ',';
        detail::append_number(out, c.eps_Hm);
        out += ',';
        detail::append_number(out, 100.0 * c.eps_H_pct);
        out += ',';
        detail::append_number(out, c.theta_max);
        out += c.valid ? ",1\n" : ",0\n";
    }
    return out;
}

// Writes through a temporary file and renames it, so a failed write leaves no
// partial output behind.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write '" + path + "'");
        out << content;
        out.close();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw InputError("cannot write '" + path + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw InputError("cannot write '" + path + "'");
    }
}

inline void export_grid(const DoeGrid& grid, const std::string& path) { write_file_atomic(path, format_grid(grid)); }

}  // namespace qubdoe
