#pragma once

// Modal analysis of  x' = A x + B u:  eigenbasis, exact step responses through
// Φ(t) = V e^{Λt} V⁻¹, and the split of each output into exponential modes
//
//   y(t) = Σ_i (init_i + input_i) e^{λ_i t} + steady
//   init  = C V diag(V⁻¹ x0)
//   input = C A⁻¹ V diag(V⁻¹ B u) = C V Λ⁻¹ diag(V⁻¹ B u)
//   steady = (−C A⁻¹ B + D) u

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "qubdoe/error.hpp"
#include "qubdoe/state_space.hpp"

namespace qubdoe {

inline constexpr double kMaxEigenbasisCondition = 1e10;

struct Eigenbasis {
    Eigen::VectorXd eigenvalues;  // 1/s, sorted by descending |λ| (fastest first)
    Eigen::MatrixXd vectors;      // V, unit-norm columns
    Eigen::MatrixXd inverse;      // V⁻¹
    double condition = 1.0;       // 2-norm condition number of V

    Eigen::VectorXd time_constants() const { return -eigenvalues.cwiseInverse(); }
};

namespace detail {

inline double condition_number(const Eigen::MatrixXd& m) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    return s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
}

// diag(c)·A symmetric means A = −diag(c)⁻¹ K with K symmetric, so
// W^{1/2} A W^{-1/2} is symmetric for W = diag(c).
inline bool has_symmetrizer(const StateSpaceModel& model) {
    const auto& c = model.state_capacities;
    if (c.size() != model.A.rows() || (c.array() <= 0.0).any()) return false;
    const Eigen::MatrixXd WA = c.asDiagonal() * model.A;
    return (WA - WA.transpose()).norm() <= 1e-10 * WA.norm();
}

}  // namespace detail

inline Eigenbasis eigendecompose(const StateSpaceModel& model) {
    const auto n = model.A.rows();
    if (n == 0 || model.A.cols() != n) throw InputError("state matrix must be square and non-empty");
    if (!model.A.allFinite()) throw NumericalError("state matrix has non-finite entries");

    Eigen::VectorXd lambda(n);
    Eigen::MatrixXd V(n, n), Vinv(n, n);
    if (detail::has_symmetrizer(model)) {
        const Eigen::VectorXd sqrt_c = model.state_capacities.cwiseSqrt();
        Eigen::MatrixXd S = sqrt_c.asDiagonal() * model.A * sqrt_c.cwiseInverse().asDiagonal();
        S = 0.5 * (S + S.transpose());
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
        if (es.info() != Eigen::Success) throw NumericalError("symmetric eigen solver failed");
        lambda = es.eigenvalues();
        V = sqrt_c.cwiseInverse().asDiagonal() * es.eigenvectors();
        Vinv = es.eigenvectors().transpose() * sqrt_c.asDiagonal();
    } else {
        const Eigen::EigenSolver<Eigen::MatrixXd> es(model.A);
        if (es.info() != Eigen::Success) throw NumericalError("eigen solver failed");
        const auto& ev = es.eigenvalues();
        for (Eigen::Index i = 0; i < n; ++i)
            if (std::abs(ev(i).imag()) > 1e-9 * std::abs(ev(i).real()))
                throw NumericalError("state matrix has complex eigenvalue " +
                                     std::to_string(ev(i).real()) + " + " +
                                     std::to_string(ev(i).imag()) + "i; not an RC model");
        lambda = ev.real();
        V = es.eigenvectors().real();
        Eigen::FullPivLU<Eigen::MatrixXd> lu(V);
        if (!lu.isInvertible())
            throw NumericalError("eigenvector matrix is singular (defective state matrix); "
                                 "regularize the model");
        Vinv = lu.inverse();
    }

    // Unit-norm columns, fastest mode first.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(lambda(a)) > std::abs(lambda(b));
    });
    Eigenbasis basis;
    basis.eigenvalues.resize(n);
    basis.vectors.resize(n, n);
    basis.inverse.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto i = order[static_cast<std::size_t>(k)];
        const double norm = V.col(i).norm();
        basis.eigenvalues(k) = lambda(i);
        basis.vectors.col(k) = V.col(i) / norm;
        basis.inverse.row(k) = Vinv.row(i) * norm;
    }

    for (Eigen::Index k = 0; k < n; ++k)
        if (!(basis.eigenvalues(k) < 0.0))
            throw NumericalError("eigenvalue " + std::to_string(basis.eigenvalues(k)) +
                                 " is not strictly negative; the model has no steady state");
    basis.condition = detail::condition_number(basis.vectors);
    if (!(basis.condition <= kMaxEigenbasisCondition))
        throw NumericalError("ill-conditioned eigenbasis (cond(V) = " +
                             std::to_string(basis.condition) + "); regularize the model");
    const double residual =
        (model.A * basis.vectors - basis.vectors * basis.eigenvalues.asDiagonal()).norm();
    if (residual > 1e-9 * model.A.norm())
        throw NumericalError("eigendecomposition residual too large: " + std::to_string(residual));
    return basis;
}

// x(0) = −A⁻¹ B u0: the steady state under constant inputs u0.
inline Eigen::VectorXd initial_state(const StateSpaceModel& model, const Eigen::VectorXd& u0) {
    if (u0.size() != model.B.cols()) throw InputError("input vector size does not match the model");
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(model.A);
    if (!lu.isInvertible()) throw NumericalError("state matrix A is singular");
    const Eigen::VectorXd bu = model.B * u0;
    Eigen::VectorXd x = -lu.solve(bu);
    // One step of iterative refinement keeps the residual at round-off level.
    x -= lu.solve(model.A * x + bu);
    return x;
}

// Exact propagation for piecewise-constant inputs; the eigenbasis is computed once.
class ModalPropagator {
public:
    explicit ModalPropagator(StateSpaceModel model)
        : model_(std::move(model)), basis_(eigendecompose(model_)) {}

    const StateSpaceModel& model() const { return model_; }
    const Eigenbasis& basis() const { return basis_; }

    // Φ(t) = V e^{Λt} V⁻¹
    Eigen::MatrixXd transition(double t) const {
        const Eigen::VectorXd e = (basis_.eigenvalues * t).array().exp();
        return basis_.vectors * e.asDiagonal() * basis_.inverse;
    }

    // x(t) = e^{At} x0 + A⁻¹(e^{At} − I) B u
    Eigen::VectorXd state(const Eigen::VectorXd& x0, const Eigen::VectorXd& u, double t) const {
        return basis_.vectors * modal_state(basis_.inverse * x0, basis_.inverse * (model_.B * u), t);
    }

    Eigen::VectorXd output(const Eigen::VectorXd& x0, const Eigen::VectorXd& u, double t) const {
        return model_.C * state(x0, u, t) + model_.D * u;
    }

    // Modal coordinates z = V⁻¹x evolve independently:
    //   z_i(t) = e^{λ_i t} z0_i + (e^{λ_i t} − 1)/λ_i · w_i,   w = V⁻¹ B u.
    Eigen::VectorXd modal_state(const Eigen::VectorXd& z0, const Eigen::VectorXd& w, double t) const {
        Eigen::VectorXd z(z0.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double lt = basis_.eigenvalues(i) * t;
            z(i) = std::exp(lt) * z0(i) + std::expm1(lt) / basis_.eigenvalues(i) * w(i);
        }
        return z;
    }

private:
    StateSpaceModel model_;
    Eigenbasis basis_;
};

// Rows are times, columns outputs.
inline Eigen::MatrixXd step_response(const StateSpaceModel& model, const Eigen::VectorXd& u,
                                     const Eigen::VectorXd& x0, std::span<const double> times) {
    if (u.size() != model.B.cols() || x0.size() != model.A.rows())
        throw InputError("input or state vector size does not match the model");
    const ModalPropagator prop(model);
    Eigen::MatrixXd y(static_cast<Eigen::Index>(times.size()), model.C.rows());
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(times[k] >= 0.0)) throw InputError("step_response times must be >= 0");
        y.row(static_cast<Eigen::Index>(k)) = prop.output(x0, u, times[k]).transpose();
    }
    return y;
}

struct ModalDecomposition {
    Eigen::VectorXd eigenvalues;       // 1/s
    Eigen::MatrixXd eigenvectors;      // V
    Eigen::VectorXd time_constants;    // s
    Eigen::MatrixXd init_amplitudes;   // outputs × modes
    Eigen::MatrixXd input_amplitudes;  // outputs × modes
    Eigen::VectorXd steady_value;      // per output
    std::vector<std::string> output_names;

    Eigen::MatrixXd amplitudes() const { return init_amplitudes + input_amplitudes; }

    Eigen::VectorXd evaluate(double t) const {
        const Eigen::VectorXd e = (eigenvalues * t).array().exp();
        return amplitudes() * e + steady_value;
    }
};

inline ModalDecomposition modal_decomposition(const StateSpaceModel& model, const Eigen::VectorXd& u,
                                              const Eigen::VectorXd& x0) {
    if (u.size() != model.B.cols() || x0.size() != model.A.rows())
        throw InputError("input or state vector size does not match the model");
    const auto basis = eigendecompose(model);
    const Eigen::MatrixXd CV = model.C * basis.vectors;
    const Eigen::VectorXd z0 = basis.inverse * x0;
    const Eigen::VectorXd w = basis.inverse * (model.B * u);
    const Eigen::VectorXd w_over_lambda = w.cwiseQuotient(basis.eigenvalues);

    ModalDecomposition md;
    md.eigenvalues = basis.eigenvalues;
    md.eigenvectors = basis.vectors;
    md.time_constants = basis.time_constants();
    md.init_amplitudes = CV * z0.asDiagonal();
    md.input_amplitudes = CV * w_over_lambda.asDiagonal();
    md.steady_value = -CV * w_over_lambda + model.D * u;
    md.output_names = model.output_names;
    return md;
}

enum class ModeClass { a, b, c, d, e };

inline char to_char(ModeClass c) { return static_cast<char>('a' + static_cast<int>(c)); }

// Mode classes, judged on the settling time 4τ against the experiment length
// and on |amplitude| against the largest amplitude of the same output:
//   a  fast (4τ ≤ t/5), significant         b  4τ ≤ t, insignificant
//   c  t/5 < 4τ ≤ 4t, significant           d  t < 4τ ≤ 4t, insignificant
//   e  slow (4τ > 4t), any amplitude
struct ModeClassThresholds {
    double significance = 0.01;
    double settling_factor = 4.0;
    double fast_fraction = 0.2;
    double insignificant_split = 1.0;
    double slow_multiple = 4.0;
};

struct ClassifiedMode {
    std::size_t mode = 0;
    double time_constant = 0.0;
    double amplitude = 0.0;
    ModeClass mode_class = ModeClass::a;
};

inline std::vector<ClassifiedMode> classify_modes(const ModalDecomposition& decomp, double t_qub,
                                                  std::size_t output = 0,
                                                  const ModeClassThresholds& th = {}) {
    if (!(t_qub > 0.0)) throw InputError("t_qub must be > 0");
    if (output >= static_cast<std::size_t>(decomp.init_amplitudes.rows()))
        throw InputError("output index out of range");
    const Eigen::RowVectorXd amp = decomp.amplitudes().row(static_cast<Eigen::Index>(output));
    const double max_amp = amp.cwiseAbs().maxCoeff();
    std::vector<ClassifiedMode> out;
    for (Eigen::Index i = 0; i < amp.size(); ++i) {
        const double tau = decomp.time_constants(i);
        const double settle = th.settling_factor * tau;
        const bool significant = max_amp > 0.0 && std::abs(amp(i)) >= th.significance * max_amp;
        ModeClass cls;
        if (settle > th.slow_multiple * t_qub)
            cls = ModeClass::e;
        else if (significant)
            cls = settle <= th.fast_fraction * t_qub ? ModeClass::a : ModeClass::c;
        else
            cls = settle <= th.insignificant_split * t_qub ? ModeClass::b : ModeClass::d;
        out.push_back({static_cast<std::size_t>(i), tau, amp(i), cls});
    }
    return out;
}

}  // namespace qubdoe
