#pragma once

// Two-pulse QUB experiment: heating at P_h for t_qub, then cooling at P_c for
// t_qub, starting from the steady state under (T_o, P0). The measured response
// is fitted by the first-order model  C dΔT/dt = P − H ΔT,  ΔT = θ − T_o.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qubdoe/conductance.hpp"
#include "qubdoe/error.hpp"
#include "qubdoe/modal.hpp"
#include "qubdoe/network_model.hpp"
#include "qubdoe/state_space.hpp"

namespace qubdoe {

struct QubProtocol {
    double outdoor_temperature = 0.0;  // T_o, °C
    double initial_power = 0.0;        // P0, W
    double heating_power = 0.0;        // P_h, W
    double cooling_power = 0.0;        // P_c, W
    double duration = 0.0;             // t_qub, s (each phase)
    double slope_window_fraction = 1.0 / 3.0;
    double sample_dt = 60.0;  // s
    // Temperature inputs held at a value other than T_o (e.g. ground).
    std::map<std::string, double> boundary_temperatures;

    void validate() const {
        if (!(duration > 0.0)) throw InputError("protocol: t_qub must be > 0");
        if (!(cooling_power >= 0.0)) throw InputError("protocol: P_c must be >= 0");
        if (!(heating_power > cooling_power)) throw InputError("protocol: P_h must exceed P_c");
        if (!(slope_window_fraction > 0.0 && slope_window_fraction <= 1.0))
            throw InputError("protocol: slope window fraction must be in (0, 1]");
        if (!(sample_dt > 0.0 && sample_dt <= duration / 20.0 * (1.0 + 1e-12)))
            throw InputError("protocol: sample_dt must be in (0, t_qub/20]");
        if (!std::isfinite(outdoor_temperature) || !std::isfinite(initial_power))
            throw InputError("protocol: T_o and P0 must be finite");
    }
};

enum class Phase { heating, cooling };

inline const char* to_string(Phase p) { return p == Phase::heating ? "heating" : "cooling"; }

struct QubTrace {
    std::vector<double> times;    // s
    std::vector<double> delta_T;  // K, indoor (weighted mean) minus T_o
    std::vector<double> power;    // W
    std::vector<Phase> phase;
    std::vector<std::string> warnings;

    std::size_t size() const { return times.size(); }

    // Index of the last heating sample; the phase switch happens at its time.
    std::size_t switch_index() const {
        std::size_t k = 0;
        while (k + 1 < phase.size() && phase[k + 1] == Phase::heating) ++k;
        return k;
    }

    void validate() const {
        const auto n = times.size();
        if (n < 2 || delta_T.size() != n || power.size() != n || phase.size() != n)
            throw InputError("trace: columns must have equal length >= 2");
        for (std::size_t k = 1; k < n; ++k)
            if (!(times[k] > times[k - 1])) throw InputError("trace: times must be strictly increasing");
        if (phase.front() != Phase::heating) throw InputError("trace: must start in the heating phase");
        std::size_t switches = 0;
        for (std::size_t k = 1; k < n; ++k) {
            if (phase[k] != phase[k - 1]) ++switches;
            if (phase[k] == Phase::heating && phase[k - 1] == Phase::cooling)
                throw InputError("trace: heating after cooling");
        }
        if (switches != 1) throw InputError("trace: phase must switch exactly once");
    }
};

// Which inputs carry the heating power and how the indoor temperature is formed.
struct QubTarget {
    std::vector<std::string> power_inputs;
    std::vector<double> power_split;  // fractions, sum 1
    std::vector<std::string> outputs;
    std::vector<double> output_weights;  // normalized internally
};

inline QubTarget single_zone_target(std::string power_input, std::string output) {
    return {{std::move(power_input)}, {1.0}, {std::move(output)}, {1.0}};
}

// Zones of the circuit: the mean indoor temperature is air-mass weighted and the
// heating power is split over the zone flow sources in proportion to air mass.
inline QubTarget zone_target(const ThermalCircuit& circuit) {
    if (circuit.zones.empty()) throw InputError("building declares no zones");
    const auto power_inputs = zone_power_inputs(circuit);
    QubTarget t;
    double heated_mass = 0.0;
    for (const auto& z : circuit.zones)
        if (!power_inputs.at(z.id).empty()) heated_mass += z.air_mass;
    if (heated_mass <= 0.0) throw InputError("no zone has a flow source on its air node");
    for (const auto& z : circuit.zones) {
        t.outputs.push_back(z.air_node);
        t.output_weights.push_back(z.air_mass);
        if (const auto& p = power_inputs.at(z.id); !p.empty()) {
            t.power_inputs.push_back(p);
            t.power_split.push_back(z.air_mass / heated_mass);
        }
    }
    return t;
}

// Simulates QUB experiments on one model; the eigenbasis is computed once and
// shared by every protocol (const methods are safe to call concurrently).
class QubSimulator {
public:
    QubSimulator(const StateSpaceModel& model, QubTarget target)
        : target_(std::move(target)), propagator_(reduce(model, target_)) {
        const auto& m = propagator_.model();
        power_direction_ = Eigen::VectorXd::Zero(m.B.cols());
        for (std::size_t i = 0; i < target_.power_inputs.size(); ++i) {
            const auto& name = target_.power_inputs[i];
            if (!m.is_flow_input(name)) throw InputError("'" + name + "' is not a flow input");
            power_direction_(static_cast<Eigen::Index>(m.input_index(name))) += target_.power_split[i];
        }
        const double split = power_direction_.sum();
        if (std::abs(split - 1.0) > 1e-9) throw InputError("power split must sum to 1");
        const auto K = static_gains(m);
        power_gain_ = (K * power_direction_)(0);
        if (!(power_gain_ > 0.0)) throw NumericalError("indoor temperature does not respond to heating power");
        cV_ = m.C.row(0) * propagator_.basis().vectors;
        gains_ = K.row(0);
    }

    const QubTarget& target() const { return target_; }
    const StateSpaceModel& model() const { return propagator_.model(); }
    const ModalPropagator& propagator() const { return propagator_; }

    // Steady-state conductance seen by the experiment: 1 / (∂θ̄/∂P).
    double reference_H() const { return 1.0 / power_gain_; }

    Eigen::VectorXd inputs(double T_o, double power, const std::map<std::string, double>& boundaries) const {
        const auto& m = model();
        Eigen::VectorXd u = power * power_direction_;
        for (const auto& name : m.temperature_inputs) u(static_cast<Eigen::Index>(m.input_index(name))) = T_o;
        for (const auto& [name, value] : boundaries) {
            if (!m.is_temperature_input(name)) throw InputError("'" + name + "' is not a temperature input");
            u(static_cast<Eigen::Index>(m.input_index(name))) = value;
        }
        return u;
    }

    // Steady indoor temperature (weighted) under constant T_o and P.
    double steady_indoor(double T_o, double power, const std::map<std::string, double>& boundaries) const {
        return gains_.dot(inputs(T_o, power, boundaries));
    }

    // Power that holds the weighted indoor temperature at theta0 in steady state.
    double holding_power(double T_o, double theta0, const std::map<std::string, double>& boundaries) const {
        return (theta0 - steady_indoor(T_o, 0.0, boundaries)) / power_gain_;
    }

    QubTrace simulate(const QubProtocol& protocol) const {
        protocol.validate();
        const auto& m = model();
        const auto& basis = propagator_.basis();
        const double T_o = protocol.outdoor_temperature;
        const auto& bt = protocol.boundary_temperatures;
        const Eigen::VectorXd u0 = inputs(T_o, protocol.initial_power, bt);
        const Eigen::VectorXd uh = inputs(T_o, protocol.heating_power, bt);
        const Eigen::VectorXd uc = inputs(T_o, protocol.cooling_power, bt);

        const auto n_steps = static_cast<std::size_t>(std::ceil(protocol.duration / protocol.sample_dt - 1e-9));
        const double dt = protocol.duration / static_cast<double>(n_steps);

        const Eigen::VectorXd z0 = basis.inverse * initial_state(m, u0);
        const Eigen::VectorXd wh = basis.inverse * (m.B * uh);
        const Eigen::VectorXd wc = basis.inverse * (m.B * uc);
        const double dh = (m.D * uh)(0) - T_o;
        const double dc = (m.D * uc)(0) - T_o;
        const Eigen::VectorXd z_switch = propagator_.modal_state(z0, wh, protocol.duration);

        QubTrace trace;
        trace.times.reserve(2 * n_steps + 1);
        for (std::size_t k = 0; k <= 2 * n_steps; ++k) {
            const bool heating = k <= n_steps;
            const double t = heating ? static_cast<double>(k) * dt
                                     : protocol.duration + static_cast<double>(k - n_steps) * dt;
            const double dT = heating ? cV_.dot(propagator_.modal_state(z0, wh, t)) + dh
                                      : cV_.dot(propagator_.modal_state(z_switch, wc, t - protocol.duration)) + dc;
            trace.times.push_back(t);
            trace.delta_T.push_back(dT);
            trace.power.push_back(heating ? protocol.heating_power : protocol.cooling_power);
            trace.phase.push_back(heating ? Phase::heating : Phase::cooling);
        }
        if (protocol.heating_power <= protocol.initial_power ||
            trace.delta_T[n_steps] <= trace.delta_T.front())
            trace.warnings.push_back("non-positive heating response: P_h does not exceed the "
                                     "power holding the initial state");
        return trace;
    }

private:
    static StateSpaceModel reduce(const StateSpaceModel& model, const QubTarget& target) {
        if (target.outputs.empty() || target.outputs.size() != target.output_weights.size())
            throw InputError("QUB target needs outputs with one weight each");
        if (target.power_inputs.empty() || target.power_inputs.size() != target.power_split.size())
            throw InputError("QUB target needs power inputs with one split fraction each");
        Eigen::VectorXd w = Eigen::VectorXd::Zero(model.C.rows());
        for (std::size_t i = 0; i < target.outputs.size(); ++i)
            w(static_cast<Eigen::Index>(model.output_index(target.outputs[i]))) += target.output_weights[i];
        return with_weighted_output(model, w, "indoor");
    }

    QubTarget target_;
    ModalPropagator propagator_;
    Eigen::VectorXd power_direction_;
    Eigen::RowVectorXd cV_;
    Eigen::RowVectorXd gains_;
    double power_gain_ = 0.0;
};

inline QubTrace simulate_qub(const StateSpaceModel& model, const QubProtocol& protocol,
                             const QubTarget& target) {
    return QubSimulator(model, target).simulate(protocol);
}

struct SlopeFit {
    double alpha = 0.0;        // K/s
    double dT0 = 0.0;          // K, fitted value at t0
    double t0 = 0.0;           // s, window start
    double r2 = 1.0;
    double slope_stderr = 0.0; // K/s
    double phase_start = 0.0;  // s
    double window_mid = 0.0;   // s
    std::size_t samples = 0;
};

// Ordinary least-squares line over the final `window_fraction` of a phase.
// Heating spans [t_first, t_switch]; cooling spans [t_switch, t_last].
inline SlopeFit fit_slope(const QubTrace& trace, Phase phase, double window_fraction) {
    if (!(window_fraction > 0.0 && window_fraction <= 1.0))
        throw InputError("slope window fraction must be in (0, 1]");
    trace.validate();
    const std::size_t sw = trace.switch_index();
    const std::size_t first = phase == Phase::heating ? 0 : sw;
    const std::size_t last = phase == Phase::heating ? sw : trace.size() - 1;
    const double start = trace.times[first];
    const double end = trace.times[last];
    const double from = end - window_fraction * (end - start);
    const double tol = 1e-9 * std::max(1.0, std::abs(end));

    std::vector<std::size_t> idx;
    for (std::size_t k = first; k <= last; ++k)
        if (trace.times[k] >= from - tol) idx.push_back(k);
    if (idx.size() < 3)
        throw InputError(std::string("too few samples in the ") + to_string(phase) + " slope window");

    const double n = static_cast<double>(idx.size());
    double tm = 0.0, ym = 0.0;
    for (auto k : idx) {
        tm += trace.times[k];
        ym += trace.delta_T[k];
    }
    tm /= n;
    ym /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (auto k : idx) {
        const double dx = trace.times[k] - tm;
        const double dy = trace.delta_T[k] - ym;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) throw InputError("zero-variance slope window");

    SlopeFit fit;
    fit.alpha = sxy / sxx;
    fit.t0 = trace.times[idx.front()];
    fit.dT0 = ym + fit.alpha * (fit.t0 - tm);
    const double ss_res = std::max(0.0, syy - fit.alpha * sxy);
    fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    // Standard error of the slope, |α|·sqrt((1/r² − 1)/(n − 2)), written in the
    // residual form that stays finite for r² → 0.
    fit.slope_stderr = idx.size() > 2 ? std::sqrt(ss_res / (n - 2.0) / sxx) : 0.0;
    fit.phase_start = start;
    fit.window_mid = 0.5 * (fit.t0 + trace.times[idx.back()]);
    fit.samples = idx.size();
    return fit;
}

namespace detail {

inline void require_nondegenerate(double den, double scale, const char* what) {
    if (!(std::abs(den) > 1e-12 * scale) || !std::isfinite(den))
        throw DegenerateExperiment(std::string("degenerate experiment: ") + what +
                                   " denominator vanishes");
}

}  // namespace detail

// H_QUB = (P_h α_c − P_c α_h) / (ΔT₀ʰ α_c − ΔT₀ᶜ α_h)
inline double estimate_H(double alpha_h, double alpha_c, double dT0_h, double dT0_c, double P_h,
                         double P_c) {
    const double den = dT0_h * alpha_c - dT0_c * alpha_h;
    detail::require_nondegenerate(den, std::abs(dT0_h * alpha_c) + std::abs(dT0_c * alpha_h), "H_QUB");
    return (P_h * alpha_c - P_c * alpha_h) / den;
}

// C* = (P_h ΔT₀ᶜ − P_c ΔT₀ʰ) / (α_h ΔT₀ᶜ − α_c ΔT₀ʰ). For a first-order response it
// equals C when each ΔT₀ is taken where its slope is, and e^{t0/τ} C when the
// slopes are t0 into each phase but the ΔT₀ are the phase-origin values.
inline double estimate_C(double alpha_h, double alpha_c, double dT0_h, double dT0_c, double P_h,
                         double P_c) {
    const double den = alpha_h * dT0_c - alpha_c * dT0_h;
    detail::require_nondegenerate(den, std::abs(alpha_h * dT0_c) + std::abs(alpha_c * dT0_h), "C");
    return (P_h * dT0_c - P_c * dT0_h) / den;
}

// Solves C = C*·exp(t0·H/C) by safeguarded Newton on g(C) = C e^{−t0H/C} − C*,
// which is increasing in C and bracketed by [C*, C* e^{t0H/C*}].
inline double recover_C(double C_star, double H, double t0) {
    if (!(C_star > 0.0) || !(H > 0.0) || !(t0 >= 0.0) || !std::isfinite(C_star * H * t0))
        throw NumericalError("recover_C: need C* > 0, H > 0, t0 >= 0");
    if (t0 == 0.0) return C_star;
    const double a = t0 * H;
    const auto g = [&](double c) { return c * std::exp(-a / c) - C_star; };
    double lo = C_star;
    double hi = C_star * std::exp(a / C_star);
    if (!std::isfinite(hi) || g(lo) > 0.0 || g(hi) < 0.0)
        throw NumericalError("recover_C: no root in [C*, C*·exp(t0·H/C*)]");
    double c = hi;
    for (int it = 0; it < 200; ++it) {
        const double gc = g(c);
        if (std::abs(gc) <= 1e-15 * C_star) break;
        (gc < 0.0 ? lo : hi) = c;
        const double slope = std::exp(-a / c) * (1.0 + a / c);
        double next = c - gc / slope;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - c) <= 1e-16 * c) {
            c = next;
            break;
        }
        c = next;
    }
    if (!(std::abs(g(c)) < 1e-9 * C_star)) throw NumericalError("recover_C: Newton iteration did not converge");
    return c;
}

// Capacities C with C·e^{a/C} = C*. The map falls on (0, a] and rises on
// [a, ∞) from its minimum e·a, so there are two roots, one or none. Solved by
// bisection in u = a/C, where C·e^{a/C} = a·e^u/u.
inline std::vector<double> apparent_capacity_roots(double C_star, double a) {
    if (!(C_star > 0.0) || !(a >= 0.0)) throw NumericalError("apparent capacity: need C* > 0, a >= 0");
    if (a == 0.0) return {C_star};
    const double r = C_star / a;
    const auto phi = [&](double u) { return std::exp(u) / u - r; };
    const auto bisect = [&](double lo, double hi) {
        for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            ((phi(mid) > 0.0) == (phi(lo) > 0.0) ? lo : hi) = mid;
        }
        return a / (0.5 * (lo + hi));
    };
    if (r < std::exp(1.0)) return {};
    std::vector<double> roots{bisect(1.0 / r, 1.0)};  // C >= a
    double hi = 2.0;
    while (phi(hi) < 0.0) hi *= 2.0;
    roots.push_back(bisect(1.0, hi));  // C <= a
    return roots;
}

// ΔT(t) = ΔT₀ e^{−t/τ} + (P/G)(1 − e^{−t/τ}),  τ = C/G.
inline double first_order_response(double G, double C, double P, double dT0, double t) {
    if (!(G > 0.0) || !(C > 0.0)) throw InputError("first_order_response: G and C must be > 0");
    return dT0 - (P / G - dT0) * std::expm1(-t * G / C);
}

struct SlopePair {
    double alpha_h = 0.0;
    double alpha_c = 0.0;
};

// Tangent slopes t0 into each phase of the first-order response, with ΔT₀ the
// phase-origin values:  α = e^{−t0 G/C} (P/C − ΔT₀ G/C).
inline SlopePair analytic_slopes(double G, double C, double P_h, double P_c, double dT0_h, double dT0_c,
                                 double t0) {
    if (!(G > 0.0) || !(C > 0.0)) throw InputError("analytic_slopes: G and C must be > 0");
    const double decay = std::exp(-t0 * G / C);
    // The cooling slope is (P_c − G ΔT₀ᶜ)/C; dividing P_c by H instead is dimensionally wrong.
    return {decay * (P_h / C - dT0_h * G / C), decay * (P_c / C - dT0_c * G / C)};
}

struct QubEstimate {
    double H_qub = 0.0;    // W/K
    double C_star = 0.0;   // J/K, slopes at t0 with phase-origin ΔT
    std::optional<double> C;  // J/K, C* with the e^{t0/τ} factor removed
    double alpha_h = 0.0, alpha_c = 0.0;  // K/s
    double dT0_h = 0.0, dT0_c = 0.0;      // K, fitted values at the window starts
    double t0_h = 0.0, t0_c = 0.0;        // s, window start offsets from each phase origin
    double r2_h = 1.0, r2_c = 1.0;
    double stderr_h = 0.0, stderr_c = 0.0;
    double P_h = 0.0, P_c = 0.0;          // W, mean phase powers
    double dT_origin_h = 0.0, dT_origin_c = 0.0;
    double tau() const { return C ? *C / H_qub : C_star / H_qub; }
};

// H from the fitted slopes and the fitted values at the window starts (exact for
// a first-order response whenever both windows have the same length). C* uses
// the phase-origin values; C solves C* = C·e^{t0·H/C} with t0 at the window
// midpoint, where the least-squares slope best matches the tangent. Of two
// roots, C keeps the one nearer the capacity from the fitted midpoint values.
inline QubEstimate estimate(const QubTrace& trace, double window_fraction) {
    const auto h = fit_slope(trace, Phase::heating, window_fraction);
    const auto c = fit_slope(trace, Phase::cooling, window_fraction);
    const std::size_t sw = trace.switch_index();
    QubEstimate e;
    double ph = 0.0, pc = 0.0;
    for (std::size_t k = 0; k <= sw; ++k) ph += trace.power[k];
    for (std::size_t k = sw + 1; k < trace.size(); ++k) pc += trace.power[k];
    e.P_h = ph / static_cast<double>(sw + 1);
    e.P_c = pc / static_cast<double>(trace.size() - sw - 1);
    e.alpha_h = h.alpha;
    e.alpha_c = c.alpha;
    e.dT0_h = h.dT0;
    e.dT0_c = c.dT0;
    e.t0_h = h.t0 - h.phase_start;
    e.t0_c = c.t0 - c.phase_start;
    e.r2_h = h.r2;
    e.r2_c = c.r2;
    e.stderr_h = h.slope_stderr;
    e.stderr_c = c.slope_stderr;
    e.dT_origin_h = trace.delta_T.front();
    e.dT_origin_c = trace.delta_T[sw];
    e.H_qub = estimate_H(e.alpha_h, e.alpha_c, e.dT0_h, e.dT0_c, e.P_h, e.P_c);
    e.C_star = estimate_C(e.alpha_h, e.alpha_c, e.dT_origin_h, e.dT_origin_c, e.P_h, e.P_c);
    const double t_ref = 0.5 * ((h.window_mid - h.phase_start) + (c.window_mid - c.phase_start));
    try {
        const double local = estimate_C(e.alpha_h, e.alpha_c, h.dT0 + h.alpha * (h.window_mid - h.t0),
                                        c.dT0 + c.alpha * (c.window_mid - c.t0), e.P_h, e.P_c);
        const auto roots = e.C_star > 0.0 && e.H_qub > 0.0 ? apparent_capacity_roots(e.C_star, t_ref * e.H_qub)
                                                           : std::vector<double>{};
        if (!roots.empty())
            e.C = roots.size() == 1 || std::abs(roots[0] - local) <= std::abs(roots[1] - local) ? roots[0]
                                                                                                : roots[1];
    } catch (const NumericalError&) {
        e.C.reset();
    }
    return e;
}

}  // namespace qubdoe
