#pragma once

// Intrinsic and measurement error of the QUB estimate of H.

#include <cmath>

#include "qubdoe/error.hpp"

namespace qubdoe {

struct MeasurementErrors {
    double eps_alpha = 0.0;  // K/s
    double eps_P = 0.0;      // W
    double eps_dT = 0.0;     // K

    void validate() const {
        if (!(eps_alpha >= 0.0) || !(eps_P >= 0.0) || !(eps_dT >= 0.0))
            throw InputError("measurement errors must be >= 0");
    }
};

// ∂H_QUB/∂x for the six measured quantities, with σ = ΔT_h α_c − ΔT_c α_h the
// denominator of H_QUB. Printed sources give σ = ΔT_h α_c − ΔT_h α_c, which is
// identically zero; the H_QUB denominator is used instead.
struct QubPartials {
    double dH_dah = 0.0;
    double dH_dac = 0.0;
    double dH_dPh = 0.0;
    double dH_dPc = 0.0;
    double dH_dTh = 0.0;
    double dH_dTc = 0.0;
    double sigma = 0.0;
};

inline QubPartials partials(double alpha_h, double alpha_c, double P_h, double P_c, double dT_h, double dT_c) {
    const double sigma = dT_h * alpha_c - dT_c * alpha_h;
    const double scale = std::abs(dT_h * alpha_c) + std::abs(dT_c * alpha_h);
    if (!(std::abs(sigma) > 1e-12 * scale) || !std::isfinite(sigma))
        throw DegenerateExperiment("degenerate experiment: sigma = 0, partials undefined");
    const double num = P_h * alpha_c - P_c * alpha_h;
    const double s2 = sigma * sigma;
    QubPartials p;
    p.sigma = sigma;
    p.dH_dah = dT_c * num / s2 - P_c / sigma;
    p.dH_dac = -dT_h * num / s2 + P_h / sigma;
    p.dH_dPh = alpha_c / sigma;
    p.dH_dPc = -alpha_h / sigma;
    p.dH_dTh = -alpha_c * num / s2;
    p.dH_dTc = alpha_h * num / s2;
    return p;
}

// Root-sum-square of the six independent contributions; one error magnitude per
// quantity type, shared by the heating and cooling phases.
inline double measurement_error(const QubPartials& p, const MeasurementErrors& e) {
    const double a = e.eps_alpha * std::hypot(p.dH_dah, p.dH_dac);
    const double P = e.eps_P * std::hypot(p.dH_dPh, p.dH_dPc);
    const double T = e.eps_dT * std::hypot(p.dH_dTh, p.dH_dTc);
    return std::sqrt(a * a + P * P + T * T);
}

struct IntrinsicError {
    double eps_qub = 0.0;      // W/K
    double eps_qub_pct = 0.0;  // fraction of H_ref
};

inline IntrinsicError intrinsic_error(double H_qub, double H_ref) {
    if (!(H_ref > 0.0)) throw InputError("reference H must be > 0");
    const double eps = H_qub - H_ref;
    return {eps, eps / H_ref};
}

struct TotalError {
    double eps_H = 0.0;      // W/K
    double eps_H_pct = 0.0;  // fraction of H_ref
};

inline TotalError total_error(double eps_qub, double eps_Hm, double H_ref) {
    if (!(H_ref > 0.0)) throw InputError("reference H must be > 0");
    const double eps = std::hypot(eps_qub, eps_Hm);
    return {eps, eps / H_ref};
}

// Relative quantities (…_pct) are fractions; multiply by 100 for percent.
struct ErrorBudget {
    double eps_qub = 0.0;
    double eps_qub_pct = 0.0;
    double eps_Hm = 0.0;
    double eps_H = 0.0;
    double eps_H_pct = 0.0;
};

inline ErrorBudget error_budget(double H_qub, double H_ref, const QubPartials& p, const MeasurementErrors& e) {
    const auto in = intrinsic_error(H_qub, H_ref);
    const double hm = measurement_error(p, e);
    const auto tot = total_error(in.eps_qub, hm, H_ref);
    return {in.eps_qub, in.eps_qub_pct, hm, tot.eps_H, tot.eps_H_pct};
}

}  // namespace qubdoe
