#include "catch_amalgamated.hpp"

#include <random>

#include "qubdoe/error_budget.hpp"
#include "qubdoe/qub.hpp"
#include "support.hpp"

using namespace qubdoe;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Point {
    double ah, ac, Ph, Pc, dTh, dTc;
};

Point random_point(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return {1e-4 + 9e-4 * u(rng), -(1e-4 + 9e-4 * u(rng)), 1000.0 + 2000.0 * u(rng),
            100.0 + 400.0 * u(rng), 1.0 + 9.0 * u(rng),   10.0 + 10.0 * u(rng)};
}

double H_at(const Point& p) { return estimate_H(p.ah, p.ac, p.dTh, p.dTc, p.Ph, p.Pc); }

}  // namespace

TEST_CASE("intrinsic_error examples") {
    const auto zero = intrinsic_error(100.0, 100.0);
    CHECK(zero.eps_qub == 0.0);
    CHECK(zero.eps_qub_pct == 0.0);
    const auto overestimate = intrinsic_error(61.2, 52.4);
    CHECK_THAT(overestimate.eps_qub, WithinAbs(8.8, 1e-12));
    CHECK_THAT(100.0 * overestimate.eps_qub_pct, WithinAbs(16.8, 0.05));
    CHECK(intrinsic_error(52.4, 52.4).eps_qub == 0.0);
    CHECK(intrinsic_error(40.0, 50.0).eps_qub_pct == -0.2);
    REQUIRE_THROWS_AS(intrinsic_error(1.0, 0.0), InputError);
}

TEST_CASE("total_error examples") {
    const auto a = total_error(0.0, 5.0, 100.0);
    CHECK(a.eps_H == 5.0);
    CHECK(a.eps_H_pct == 0.05);
    const auto b = total_error(3.0, 4.0, 100.0);
    CHECK_THAT(b.eps_H, WithinRel(5.0, 1e-15));
    CHECK_THAT(b.eps_H_pct, WithinRel(0.05, 1e-15));
    const auto c = total_error(8.8, 0.0, 52.4);
    CHECK_THAT(c.eps_H, WithinRel(8.8, 1e-15));
    CHECK_THAT(100.0 * c.eps_H_pct, WithinAbs(16.8, 0.05));
    REQUIRE_THROWS_AS(total_error(1.0, 1.0, -2.0), InputError);
}

TEST_CASE("partials examples") {
    const auto p = partials(1e-3, -5e-4, 2000.0, 100.0, 2.0, 8.0);
    CHECK_THAT(p.sigma, WithinRel(-9e-3, 1e-14));
    CHECK_THAT(p.dH_dPh, WithinRel(-5e-4 / -9e-3, 1e-14));
    CHECK_THAT(p.dH_dPh, WithinAbs(0.0556, 5e-5));
    CHECK_THAT(p.dH_dPc, WithinRel(-1e-3 / -9e-3, 1e-14));

    REQUIRE_THROWS_AS(partials(1e-3, 1e-3, 500.0, 500.0, 4.0, 4.0), DegenerateExperiment);
    REQUIRE_THROWS_AS(estimate_H(1e-3, 1e-3, 4.0, 4.0, 500.0, 500.0), DegenerateExperiment);
}

TEST_CASE("analytic partials match central differences") {
    std::mt19937_64 rng(61);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const Point x = random_point(rng);
        const auto p = partials(x.ah, x.ac, x.Ph, x.Pc, x.dTh, x.dTc);
        const double H = H_at(x);
        const auto check = [&](double Point::*field, double analytic) {
            const double h = 1e-7 * std::abs(x.*field);
            const auto f = [&](double v) {
                Point y = x;
                y.*field = v;
                return H_at(y);
            };
            const double fd = test::central_difference(f, x.*field, h);
            const double floor = 1e-6 * std::abs(H / (x.*field));
            worst = std::max(worst, std::abs(fd - analytic) / std::max(std::abs(analytic), floor));
        };
        check(&Point::ah, p.dH_dah);
        check(&Point::ac, p.dH_dac);
        check(&Point::Ph, p.dH_dPh);
        check(&Point::Pc, p.dH_dPc);
        check(&Point::dTh, p.dH_dTh);
        check(&Point::dTc, p.dH_dTc);
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("measurement_error") {
    const auto p = partials(1e-3, -5e-4, 2000.0, 100.0, 2.0, 8.0);
    CHECK(measurement_error(p, {}) == 0.0);
    const double only_P = measurement_error(p, {0.0, 20.0, 0.0});
    CHECK_THAT(only_P, WithinRel(20.0 * std::sqrt(std::pow(-5e-4 / p.sigma, 2) + std::pow(1e-3 / p.sigma, 2)), 1e-14));

    const MeasurementErrors e{2e-6, 15.0, 0.4};
    const double base = measurement_error(p, e);
    CHECK_THAT(measurement_error(p, {3.0 * e.eps_alpha, 3.0 * e.eps_P, 3.0 * e.eps_dT}), WithinRel(3.0 * base, 1e-14));

    REQUIRE_THROWS_AS(MeasurementErrors({-1.0, 0.0, 0.0}).validate(), InputError);
}

TEST_CASE("measurement_error matches Monte-Carlo spread") {
    std::mt19937_64 rng(67);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 3; ++trial) {
        const Point x = random_point(rng);
        // One error per quantity type, at most 0.5% (1 sd) of either value.
        const MeasurementErrors e{0.005 * std::min(std::abs(x.ah), std::abs(x.ac)), 0.005 * std::min(x.Ph, x.Pc),
                                  0.005 * std::min(x.dTh, x.dTc)};
        const double analytic = measurement_error(partials(x.ah, x.ac, x.Ph, x.Pc, x.dTh, x.dTc), e);
        const int n = 1'000'000;
        double mean = 0.0, m2 = 0.0;
        for (int k = 0; k < n; ++k) {
            const Point y{x.ah + e.eps_alpha * normal(rng), x.ac + e.eps_alpha * normal(rng),
                          x.Ph + e.eps_P * normal(rng),     x.Pc + e.eps_P * normal(rng),
                          x.dTh + e.eps_dT * normal(rng),   x.dTc + e.eps_dT * normal(rng)};
            const double h = H_at(y);
            const double d = h - mean;
            mean += d / (k + 1);
            m2 += d * (h - mean);
        }
        CHECK_THAT(std::sqrt(m2 / (n - 1)), WithinRel(analytic, 0.05));
    }
}

TEST_CASE("consistent scaling leaves H and the relative error unchanged") {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 50; ++trial) {
        const Point x = random_point(rng);
        const double s = 0.1 + 10.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const Point y{s * x.ah, s * x.ac, s * x.Ph, s * x.Pc, s * x.dTh, s * x.dTc};
        const MeasurementErrors e{1e-6, 10.0, 0.5}, es{s * 1e-6, s * 10.0, s * 0.5};
        const double H = H_at(x);
        CHECK_THAT(H_at(y), WithinRel(H, 1e-12));
        const auto bx = error_budget(H, 0.9 * H, partials(x.ah, x.ac, x.Ph, x.Pc, x.dTh, x.dTc), e);
        const auto by = error_budget(H_at(y), 0.9 * H, partials(y.ah, y.ac, y.Ph, y.Pc, y.dTh, y.dTc), es);
        CHECK_THAT(by.eps_H_pct, WithinRel(bx.eps_H_pct, 1e-10));
    }
}

TEST_CASE("error_budget composes the parts") {
    std::mt19937_64 rng(73);
    for (int trial = 0; trial < 50; ++trial) {
        const Point x = random_point(rng);
        const double H = H_at(x);
        const auto b = error_budget(H, 1.07 * H, partials(x.ah, x.ac, x.Ph, x.Pc, x.dTh, x.dTc), {2e-6, 20.0, 0.5});
        CHECK(b.eps_H >= std::abs(b.eps_qub));
        CHECK(b.eps_H >= b.eps_Hm);
        CHECK_THAT(b.eps_H, WithinRel(std::hypot(b.eps_qub, b.eps_Hm), 1e-15));
        CHECK_THAT(b.eps_qub_pct, WithinRel(b.eps_qub / (1.07 * H), 1e-14));
        CHECK_THAT(b.eps_H_pct, WithinRel(b.eps_H / (1.07 * H), 1e-14));
    }
}
