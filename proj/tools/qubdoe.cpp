// qubdoe: command-line front end for building thermal models and QUB test design.

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qubdoe/building_io.hpp"
#include "qubdoe/conductance.hpp"
#include "qubdoe/doe.hpp"
#include "qubdoe/modal.hpp"
#include "qubdoe/network_model.hpp"
#include "qubdoe/qub.hpp"
#include "qubdoe/trace_io.hpp"

namespace {

using namespace qubdoe;

enum ExitCode { kOk = 0, kUsage = 2, kInput = 3, kNumerical = 4 };

struct Options {
    std::string building;
    std::string trace;
    std::string out;
    std::optional<double> T_o;
    std::optional<double> P0;
    std::optional<double> theta0;
    std::optional<double> P_h;
    double P_c = 0.0;
    std::optional<double> t_qub;
    double window = 1.0 / 3.0;
    double dt = 60.0;
    double eps_dT = 0.5;
    double eps_P_rel = 0.01;
    std::optional<double> eps_alpha;
    std::string ph_range;
    std::string t_range;
    std::optional<double> max_power;
    std::optional<double> max_temp;
    std::optional<double> max_duration;
    std::vector<std::string> boundaries;
};

std::string fmt(double v) {
    if (!std::isfinite(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v == 0.0 ? 0.0 : v);
    return buf;
}

void emit(const Options& o, const std::string& text) {
    if (o.out.empty())
        std::cout << text << std::flush;
    else
        write_file_atomic(o.out, text);
}

std::map<std::string, double> parse_boundaries(const std::vector<std::string>& items) {
    std::map<std::string, double> out;
    for (const auto& s : items) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw InputError("--boundary expects NAME=VALUE, got '" + s + "'");
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s.substr(eq + 1), &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size() - eq - 1) throw InputError("--boundary: bad value in '" + s + "'");
        out[s.substr(0, eq)] = v;
    }
    return out;
}

struct Range {
    double a, b;
    std::size_t n;
};

Range parse_range(const std::string& s, const char* flag) {
    Range r{};
    char tail = 0;
    long n = 0;
    if (std::sscanf(s.c_str(), "%lf:%lf:%ld%c", &r.a, &r.b, &n, &tail) != 3 || n < 1)
        throw InputError(std::string(flag) + " expects a:b:n with n >= 1, got '" + s + "'");
    r.n = static_cast<std::size_t>(n);
    return r;
}

struct Setup {
    ThermalCircuit circuit;
    StateSpaceModel model;
};

Setup load(const Options& o) {
    Setup s{load_building(o.building), {}};
    std::vector<std::string> outputs;
    for (const auto& n : s.circuit.nodes) outputs.push_back(n.id);
    s.model = to_state_space(s.circuit, outputs);
    return s;
}

template <class T>
T need(const std::optional<T>& v, const char* flag) {
    if (!v) throw InputError(std::string(flag) + " is required");
    return *v;
}

// Protocol from the flags; P0 comes from --p0 or from --theta0 as the holding power.
QubProtocol protocol_from(const Options& o, const QubSimulator& sim, bool need_ph, bool need_t) {
    if (o.P0 && o.theta0) throw InputError("give at most one of --p0 and --theta0");
    QubProtocol p;
    p.outdoor_temperature = need(o.T_o, "--to");
    p.boundary_temperatures = parse_boundaries(o.boundaries);
    p.initial_power = o.theta0 ? sim.holding_power(p.outdoor_temperature, *o.theta0, p.boundary_temperatures)
                               : o.P0.value_or(0.0);
    p.cooling_power = o.P_c;
    p.slope_window_fraction = o.window;
    p.sample_dt = o.dt;
    if (need_ph) p.heating_power = need(o.P_h, "--ph");
    if (need_t) p.duration = need(o.t_qub, "--tqub");
    return p;
}

int cmd_check(const Options& o) {
    const auto c = load_building(o.building);
    std::cout << "OK: " << c.nodes.size() << " nodes, " << c.branches.size() << " branches\n";
    return kOk;
}

int cmd_gains(const Options& o) {
    const auto s = load(o);
    const auto K = static_gains(s.model);
    std::string text = "quantity,output,input,value\n";
    for (Eigen::Index i = 0; i < K.rows(); ++i)
        for (Eigen::Index j = 0; j < K.cols(); ++j)
            text += "gain," + s.model.output_names[i] + "," + s.model.input_names[j] + "," + fmt(K(i, j)) + "\n";
    for (Eigen::Index i = 0; i < K.rows(); ++i) {
        double sum = 0.0;
        for (const auto& name : s.model.temperature_inputs) sum += K(i, static_cast<Eigen::Index>(s.model.input_index(name)));
        text += "temperature_gain_sum," + s.model.output_names[i] + ",," + fmt(sum) + "\n";
    }
    if (!s.circuit.zones.empty()) {
        const QubSimulator sim(s.model, zone_target(s.circuit));
        const double H = sim.reference_H();
        double area = 0.0;
        for (const auto& z : s.circuit.zones) area += z.floor_area;
        text += "H_W_per_K,indoor,," + fmt(H) + "\n";
        text += "R_K_per_W,indoor,," + fmt(1.0 / H) + "\n";
        text += "areal_H_W_per_m2K,indoor,," + fmt(areal_H(H, area)) + "\n";
    }
    emit(o, text);
    return kOk;
}

int cmd_eig(const Options& o) {
    const auto s = load(o);
    const QubSimulator sim(s.model, zone_target(s.circuit));
    const auto p = protocol_from(o, sim, true, true);
    const auto& m = sim.model();
    const auto x0 = initial_state(m, sim.inputs(p.outdoor_temperature, p.initial_power, p.boundary_temperatures));
    const auto decomp = modal_decomposition(m, sim.inputs(p.outdoor_temperature, p.heating_power, p.boundary_temperatures), x0);
    const auto classes = classify_modes(decomp, p.duration);
    std::string text = "mode_index,tau_s,lambda_per_s,init_amp,input_amp,class\n";
    for (const auto& c : classes) {
        const auto i = static_cast<Eigen::Index>(c.mode);
        text += std::to_string(c.mode) + "," + fmt(c.time_constant) + "," + fmt(decomp.eigenvalues(i)) + "," +
                fmt(decomp.init_amplitudes(0, i)) + "," + fmt(decomp.input_amplitudes(0, i)) + "," +
                to_char(c.mode_class) + "\n";
    }
    emit(o, text);
    return kOk;
}

int cmd_simulate(const Options& o) {
    const auto s = load(o);
    const QubSimulator sim(s.model, zone_target(s.circuit));
    const auto trace = sim.simulate(protocol_from(o, sim, true, true));
    for (const auto& w : trace.warnings) std::cerr << "warning: " << w << "\n";
    emit(o, format_trace(trace));
    return kOk;
}

int cmd_estimate(const Options& o) {
    const auto trace = load_trace(o.trace);
    const auto e = estimate(trace, o.window);
    std::string text = "H_qub_W_per_K,C_star_J_per_K,C_J_per_K,alpha_h,alpha_c,r2_h,r2_c\n";
    text += fmt(e.H_qub) + "," + fmt(e.C_star) + "," + (e.C ? fmt(*e.C) : "nan") + "," + fmt(e.alpha_h) + "," +
            fmt(e.alpha_c) + "," + fmt(e.r2_h) + "," + fmt(e.r2_c) + "\n";
    if (!(e.alpha_h > 0.0) || !(e.alpha_c < 0.0))
        std::cerr << "warning: slopes do not describe a heating then cooling response\n";
    emit(o, text);
    return kOk;
}

DoeGrid run_sweep(const Options& o, const QubSimulator& sim, const QubProtocol& p) {
    std::vector<double> ph, t;
    if (!o.ph_range.empty()) {
        const auto r = parse_range(o.ph_range, "--ph-range");
        ph = log_axis(r.a, r.b, r.n);
    } else {
        const double pm = p.initial_power;
        if (!(pm > 0.0))
            throw InputError("maintenance power is not positive; give --ph-range or a warmer --p0/--theta0");
        ph = log_axis(pm, 4.0 * pm, 40);
    }
    if (!o.t_range.empty()) {
        const auto r = parse_range(o.t_range, "--t-range");
        t = linear_axis(r.a, r.b, r.n);
    } else {
        t = linear_axis(3600.0, 12.0 * 3600.0, 40);
    }
    const ErrorPolicy policy{o.eps_dT, o.eps_P_rel, o.eps_alpha};
    return sweep(sim, p, ph, t, policy, sim.reference_H());
}

int cmd_sweep(const Options& o) {
    const auto s = load(o);
    const QubSimulator sim(s.model, zone_target(s.circuit));
    const auto grid = run_sweep(o, sim, protocol_from(o, sim, false, false));
    emit(o, format_grid(grid));
    return kOk;
}

int cmd_optimum(const Options& o) {
    const auto s = load(o);
    const QubSimulator sim(s.model, zone_target(s.circuit));
    DesignConstraints k;
    if (o.max_power) k.max_power = *o.max_power;
    if (o.max_temp) k.max_indoor_temperature = *o.max_temp;
    if (o.max_duration) k.max_total_duration = *o.max_duration;
    k.validate();
    const auto grid = run_sweep(o, sim, protocol_from(o, sim, false, false));
    const auto best = select_optimum(grid, k);
    if (!o.out.empty()) export_grid(grid, o.out);
    std::cout << "optimum: ph_W=" << fmt(best.ph) << " t_qub_s=" << fmt(best.t_qub)
              << " eps_H_pct=" << fmt(100.0 * best.eps_H_pct) << " eps_qub_pct=" << fmt(100.0 * best.cell.eps_qub_pct)
              << " H_qub_W_per_K=" << fmt(best.cell.H_qub) << " H_ref_W_per_K=" << fmt(grid.H_ref)
              << " theta_max_C=" << fmt(best.cell.theta_max) << "\n";
    return kOk;
}

void add_building(CLI::App* sub, Options& o) {
    sub->add_option("building", o.building, "Building JSON file")->required();
}

void add_protocol(CLI::App* sub, Options& o, bool ph, bool t) {
    sub->add_option("--to", o.T_o, "Outdoor temperature, °C")->required();
    sub->add_option("--p0", o.P0, "Power before the test, W (default 0)");
    sub->add_option("--theta0", o.theta0, "Initial indoor temperature, °C (sets P0 to the holding power)");
    sub->add_option("--pc", o.P_c, "Cooling-phase power, W")->capture_default_str();
    sub->add_option("--window", o.window, "Slope window, fraction of each phase")->capture_default_str();
    sub->add_option("--dt", o.dt, "Sample interval, s")->capture_default_str();
    sub->add_option("--boundary", o.boundaries, "Temperature source held apart from T_o, NAME=VALUE");
    if (ph) sub->add_option("--ph", o.P_h, "Heating power, W")->required();
    if (t) sub->add_option("--tqub", o.t_qub, "Duration of each phase, s")->required();
}

void add_sweep(CLI::App* sub, Options& o) {
    sub->add_option("--ph-range", o.ph_range, "P_h axis a:b:n, W, log-spaced (default P0:4·P0:40)");
    sub->add_option("--t-range", o.t_range, "t_qub axis a:b:n, s, linear (default 3600:43200:40)");
    sub->add_option("--eps-dt", o.eps_dT, "Temperature error, K")->capture_default_str();
    sub->add_option("--eps-p-rel", o.eps_P_rel, "Power error, fraction of P_h")->capture_default_str();
    sub->add_option("--eps-alpha", o.eps_alpha, "Slope error, K/s (default: slope-fit standard error)");
}

int run(int argc, char** argv) {
    CLI::App app{"QUB test design for building thermal models"};
    app.require_subcommand(1);
    Options o;

    auto* check = app.add_subcommand("check", "Validate a building file");
    add_building(check, o);

    auto* eig = app.add_subcommand("eig", "Modes of the indoor response: time constants, amplitudes, classes");
    add_building(eig, o);
    add_protocol(eig, o, true, true);
    eig->add_option("--out", o.out, "Output file (default stdout)");

    auto* gains = app.add_subcommand("gains", "Static gains and heat transfer coefficient");
    add_building(gains, o);
    gains->add_option("--out", o.out, "Output file (default stdout)");

    auto* simulate = app.add_subcommand("simulate", "Simulate a QUB experiment and write the trace");
    add_building(simulate, o);
    add_protocol(simulate, o, true, true);
    simulate->add_option("--out", o.out, "Trace CSV (default stdout)");

    auto* est = app.add_subcommand("estimate", "Estimate H and C from a trace");
    est->add_option("--trace", o.trace, "Trace CSV")->required();
    est->add_option("--window", o.window, "Slope window, fraction of each phase")->capture_default_str();
    est->add_option("--out", o.out, "Output file (default stdout)");

    auto* sw = app.add_subcommand("sweep", "Error map over (P_h, t_qub)");
    add_building(sw, o);
    add_protocol(sw, o, false, false);
    add_sweep(sw, o);
    sw->add_option("--out", o.out, "Grid CSV (default stdout)");

    auto* opt = app.add_subcommand("optimum", "Minimum-error design under constraints");
    add_building(opt, o);
    add_protocol(opt, o, false, false);
    add_sweep(opt, o);
    opt->add_option("--max-power", o.max_power, "Maximum heating power, W");
    opt->add_option("--max-temp", o.max_temp, "Maximum indoor temperature, °C");
    opt->add_option("--max-duration", o.max_duration, "Maximum total duration (both phases), s");
    opt->add_option("--out", o.out, "Also write the grid CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (*check) return cmd_check(o);
        if (*eig) return cmd_eig(o);
        if (*gains) return cmd_gains(o);
        if (*simulate) return cmd_simulate(o);
        if (*est) return cmd_estimate(o);
        if (*sw) return cmd_sweep(o);
        if (*opt) return cmd_optimum(o);
    } catch (const InputError& e) {
        std::cerr << "error: input: " << e.what() << "\n";
        return kInput;
    } catch (const NumericalError& e) {
        std::cerr << "error: numerical: " << e.what() << "\n";
        return kNumerical;
    }
    return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
}
