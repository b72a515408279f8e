#include "catch_amalgamated.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qubdoe/building_io.hpp"
#include "qubdoe/doe.hpp"
#include "support.hpp"

using namespace qubdoe;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

QubSimulator simulator_for(const ThermalCircuit& c) {
    std::vector<std::string> outputs;
    for (const auto& z : c.zones) outputs.push_back(z.air_node);
    return QubSimulator(to_state_space(c, outputs), zone_target(c));
}

QubProtocol base_protocol(double T_o, double P0) {
    QubProtocol p;
    p.outdoor_temperature = T_o;
    p.initial_power = P0;
    p.cooling_power = 0.0;
    p.heating_power = 2.0 * P0 + 1.0;
    p.duration = 3600.0;
    p.sample_dt = 60.0;
    return p;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct ScopedEnv {
    explicit ScopedEnv(const char* value) { ::setenv("QUBDOE_THREADS", value, 1); }
    ~ScopedEnv() { ::unsetenv("QUBDOE_THREADS"); }
};

DoeCell cell(double ph, double t, double eps, bool valid = true, double theta = 25.0) {
    DoeCell c;
    c.ph = ph;
    c.t_qub = t;
    c.eps_H_pct = eps;
    c.valid = valid;
    c.theta_max = theta;
    return c;
}

DoeGrid grid_of(std::vector<double> ph, std::vector<double> t, std::vector<DoeCell> cells) {
    DoeGrid g;
    g.ph_values = std::move(ph);
    g.t_values = std::move(t);
    g.cells = std::move(cells);
    g.H_ref = 50.0;
    return g;
}

}  // namespace

TEST_CASE("axes") {
    const auto lin = linear_axis(3600.0, 43200.0, 12);
    CHECK(lin.front() == 3600.0);
    CHECK(lin.back() == 43200.0);
    CHECK_THAT(lin[1], WithinRel(7200.0, 1e-15));
    const auto lg = log_axis(900.0, 3600.0, 3);
    CHECK(lg.front() == 900.0);
    CHECK(lg.back() == 3600.0);
    CHECK_THAT(lg[1], WithinRel(1800.0, 1e-14));
    CHECK(linear_axis(5.0, 5.0, 1) == std::vector<double>{5.0});
    REQUIRE_THROWS_AS(linear_axis(1.0, 2.0, 0), InputError);
    REQUIRE_THROWS_AS(linear_axis(2.0, 1.0, 3), InputError);
    REQUIRE_THROWS_AS(log_axis(0.0, 1.0, 3), InputError);
}

TEST_CASE("ErrorPolicy resolves per-cell errors") {
    QubEstimate e;
    e.P_h = 2000.0;
    e.stderr_h = 3e-7;
    e.stderr_c = 5e-7;
    const auto m = ErrorPolicy{}.resolve(e);
    CHECK(m.eps_dT == 0.5);
    CHECK(m.eps_P == 20.0);
    CHECK(m.eps_alpha == 5e-7);
    ErrorPolicy fixed;
    fixed.eps_alpha = 1e-6;
    CHECK(fixed.resolve(e).eps_alpha == 1e-6);
}

TEST_CASE("single-state model has zero intrinsic error everywhere") {
    const auto c = test::first_order_circuit(100.0, 1e6);
    const auto sim = simulator_for(c);
    const auto base = base_protocol(0.0, 0.0);
    const std::vector<double> one_p{1000.0}, one_t{1e4};
    const auto g1 = sweep(sim, base, one_p, one_t, ErrorPolicy{}, 100.0);
    REQUIRE(g1.cells.size() == 1);
    REQUIRE(g1.cells[0].valid);
    CHECK_THAT(g1.cells[0].eps_qub_pct, WithinAbs(0.0, 1e-9));

    auto warm = base_protocol(5.0, 800.0);
    const auto ph = log_axis(900.0, 4000.0, 5);
    const auto t = linear_axis(3600.0, 36000.0, 5);
    const auto g = sweep(sim, warm, ph, t, ErrorPolicy{}, sim.reference_H());
    for (const auto& cl : g.cells) {
        REQUIRE(cl.valid);
        CHECK_THAT(cl.eps_qub_pct, WithinAbs(0.0, 1e-9));
        CHECK(cl.eps_Hm > 0.0);
    }
}

TEST_CASE("sub-grid sweeps reproduce full-sweep cells bit for bit") {
    const auto c = load_building(test::model_path("bungalow.json"));
    const auto sim = simulator_for(c);
    const auto base = base_protocol(2.0, maintenance_power(sim, base_protocol(2.0, 0.0), 20.0));
    const auto ph = log_axis(base.initial_power, 4.0 * base.initial_power, 6);
    const auto t = linear_axis(3600.0, 5.0 * 3600.0, 5);
    const auto full = sweep(sim, base, ph, t, ErrorPolicy{}, sim.reference_H());
    const std::vector<double> sub_p{ph[2], ph[4]}, sub_t{t[1], t[3], t[4]};
    const auto sub = sweep(sim, base, sub_p, sub_t, ErrorPolicy{}, sim.reference_H());
    const auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
    for (std::size_t i = 0; i < sub_p.size(); ++i)
        for (std::size_t j = 0; j < sub_t.size(); ++j) {
            const auto& a = sub.at(i, j);
            const auto& b = full.at(i == 0 ? 2 : 4, j == 0 ? 1 : (j == 1 ? 3 : 4));
            CHECK(same(a.H_qub, b.H_qub));
            CHECK(same(a.eps_H_pct, b.eps_H_pct));
            CHECK(same(a.theta_max, b.theta_max));
            CHECK(a.valid == b.valid);
        }
}

TEST_CASE("bungalow sweep structure") {
    const auto c = load_building(test::model_path("bungalow.json"));
    const auto sim = simulator_for(c);
    const double P_m = maintenance_power(sim, base_protocol(2.0, 0.0), 20.0);
    CHECK_THAT(P_m, WithinRel(sim.reference_H() * 18.0, 1e-10));
    const auto base = base_protocol(2.0, P_m);
    const auto ph = log_axis(P_m, 4.0 * P_m, 8);
    const auto t = linear_axis(3600.0, 12.0 * 3600.0, 12);
    const auto g = sweep(sim, base, ph, t, ErrorPolicy{}, sim.reference_H());

    SECTION("maintenance power is not a usable heating power") {
        for (std::size_t j = 0; j < t.size(); ++j) {
            CHECK_FALSE(g.at(0, j).valid);
            CHECK(g.at(0, j).flag == "ill-posed slopes");
        }
    }
    SECTION("intrinsic error is small once t_qub reaches four hours") {
        for (std::size_t j = 0; j < t.size(); ++j) {
            if (t[j] < 4.0 * 3600.0) continue;
            for (std::size_t i = 1; i < ph.size(); ++i) {
                REQUIRE(g.at(i, j).valid);
                CHECK(std::abs(g.at(i, j).eps_qub_pct) < 0.02);
            }
        }
    }
    SECTION("longest experiment is never worse than the shortest") {
        double first = 0.0, last = 0.0;
        for (std::size_t i = 1; i < ph.size(); ++i) {
            first = std::max(first, std::abs(g.at(i, 0).eps_qub_pct));
            last = std::max(last, std::abs(g.at(i, t.size() - 1).eps_qub_pct));
        }
        CHECK(last <= first);
    }
    SECTION("peak temperature grows with power") {
        for (std::size_t j = 0; j < t.size(); ++j)
            for (std::size_t i = 1; i < ph.size(); ++i) {
                CHECK(g.at(i, j).theta_max >= g.at(i - 1, j).theta_max);
                CHECK(g.at(i, j).theta_max >= 20.0);
            }
    }
    SECTION("total error: power helps long tests and hurts short ones") {
        const std::size_t last_p = ph.size() - 1, last_t = t.size() - 1;
        for (std::size_t i = 2; i < ph.size(); ++i) CHECK(g.at(i, last_t).eps_H_pct <= g.at(i - 1, last_t).eps_H_pct);
        CHECK(g.at(last_p, 0).eps_H_pct > 2.0 * g.at(last_p, last_t).eps_H_pct);
        CHECK(g.at(last_p, last_t).eps_H_pct < 0.02);
        for (std::size_t i = 1; i < ph.size(); ++i)
            for (std::size_t j = 0; j < t.size(); ++j) CHECK(g.at(i, j).eps_H_pct >= g.at(i, j).eps_Hm / g.H_ref);
    }
}

TEST_CASE("ladder sweep: long experiments are never worse") {
    const auto c = load_building(test::model_path("ladder5.json"));
    const auto sim = simulator_for(c);
    auto base = base_protocol(0.0, 0.0);
    base.boundary_temperatures = {{"T_adj", 0.0}};
    base.initial_power = maintenance_power(sim, base, 20.0);
    const auto ph = log_axis(1.1 * base.initial_power, 4.0 * base.initial_power, 6);
    const auto t = linear_axis(3600.0, 12.0 * 3600.0, 6);
    const auto g = sweep(sim, base, ph, t, ErrorPolicy{}, sim.reference_H());
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < ph.size(); ++i) {
        first = std::max(first, std::abs(g.at(i, 0).eps_qub_pct));
        last = std::max(last, std::abs(g.at(i, t.size() - 1).eps_qub_pct));
    }
    CHECK(last <= first);
}

TEST_CASE("sweep rejects bad inputs before computing") {
    const auto sim = simulator_for(test::first_order_circuit(100.0, 1e6));
    const auto base = base_protocol(0.0, 0.0);
    const std::vector<double> p{1000.0}, t{1e4}, empty, decreasing{2e4, 1e4};
    REQUIRE_THROWS_AS(sweep(sim, base, empty, t, ErrorPolicy{}, 100.0), InputError);
    REQUIRE_THROWS_AS(sweep(sim, base, p, decreasing, ErrorPolicy{}, 100.0), InputError);
    REQUIRE_THROWS_AS(sweep(sim, base, p, t, ErrorPolicy{}, 0.0), InputError);
    ErrorPolicy negative;
    negative.eps_dT = -1.0;
    REQUIRE_THROWS_AS(sweep(sim, base, p, t, negative, 100.0), InputError);
    auto bad = base;
    bad.boundary_temperatures = {{"T_nope", 3.0}};
    REQUIRE_THROWS_AS(sweep(sim, bad, p, t, ErrorPolicy{}, 100.0), InputError);
}

TEST_CASE("sweep does not depend on the thread count") {
    const auto c = load_building(test::model_path("house.json"));
    const auto sim = simulator_for(c);
    auto base = base_protocol(5.0, 0.0);
    base.boundary_temperatures = {{"T_g", 10.0}};
    base.initial_power = maintenance_power(sim, base, 20.0);
    const auto ph = log_axis(1.2 * base.initial_power, 3.0 * base.initial_power, 5);
    const auto t = linear_axis(3.0 * 3600.0, 9.0 * 3600.0, 4);
    std::string one, four;
    {
        ScopedEnv env("1");
        one = format_grid(sweep(sim, base, ph, t, ErrorPolicy{}, sim.reference_H()));
    }
    {
        ScopedEnv env("4");
        four = format_grid(sweep(sim, base, ph, t, ErrorPolicy{}, sim.reference_H()));
    }
    CHECK(one == four);
    ScopedEnv bad("many");
    REQUIRE_THROWS_AS(sweep(sim, base, ph, t, ErrorPolicy{}, sim.reference_H()), InputError);
}

TEST_CASE("select_optimum") {
    SECTION("single admissible cell") {
        const auto g = grid_of({1000.0, 2000.0}, {3600.0},
                               {cell(1000.0, 3600.0, 0.01, false), cell(2000.0, 3600.0, 0.2)});
        const auto d = select_optimum(g, {});
        CHECK(d.ph == 2000.0);
        CHECK(d.eps_H_pct == 0.2);
    }
    SECTION("minimum absolute error, ties to shorter then cheaper") {
        const auto g = grid_of({1000.0, 2000.0}, {3600.0, 7200.0},
                               {cell(1000.0, 3600.0, 0.05), cell(2000.0, 3600.0, -0.03),
                                cell(1000.0, 7200.0, 0.03), cell(2000.0, 7200.0, 0.04)});
        const auto d = select_optimum(g, {});
        CHECK(d.ph == 2000.0);
        CHECK(d.t_qub == 3600.0);
        CHECK(d.eps_H_pct == -0.03);

        const auto tie = grid_of({1000.0, 2000.0}, {3600.0},
                                 {cell(1000.0, 3600.0, 0.03), cell(2000.0, 3600.0, 0.03)});
        CHECK(select_optimum(tie, {}).ph == 1000.0);
    }
    SECTION("constraints") {
        const auto g = grid_of({1000.0, 2000.0}, {3600.0, 7200.0},
                               {cell(1000.0, 3600.0, 0.05, true, 24.0), cell(2000.0, 3600.0, 0.02, true, 30.0),
                                cell(1000.0, 7200.0, 0.04, true, 26.0), cell(2000.0, 7200.0, 0.01, true, 35.0)});
        DesignConstraints k;
        k.max_power = 1500.0;
        CHECK(select_optimum(g, k).t_qub == 7200.0);
        k.max_indoor_temperature = 25.0;
        CHECK(select_optimum(g, k).t_qub == 3600.0);
        k.max_total_duration = 3.0 * 3600.0;
        CHECK(select_optimum(g, k).eps_H_pct == 0.05);

        DesignConstraints low;
        low.max_power = 500.0;
        REQUIRE_THROWS_AS(select_optimum(g, low), InfeasibleDesign);
        REQUIRE_THROWS_WITH(select_optimum(g, low), ContainsSubstring("max_power"));
        DesignConstraints cold;
        cold.max_indoor_temperature = 20.0;
        REQUIRE_THROWS_WITH(select_optimum(g, cold), ContainsSubstring("max_indoor_temperature"));
        DesignConstraints jointly;
        jointly.max_power = 1500.0;
        jointly.max_total_duration = 2.0 * 3600.0;
        jointly.max_indoor_temperature = 23.0;
        REQUIRE_THROWS_WITH(select_optimum(g, jointly), ContainsSubstring("max_indoor_temperature"));
        jointly.max_indoor_temperature = 25.0;
        jointly.max_power = 1000.0;
        jointly.max_total_duration = 1.0 * 3600.0;
        REQUIRE_THROWS_WITH(select_optimum(g, jointly), ContainsSubstring("max_total_duration"));
        DesignConstraints bad;
        bad.max_power = -1.0;
        REQUIRE_THROWS_AS(select_optimum(g, bad), InputError);
    }
    SECTION("no valid cell") {
        const auto g = grid_of({1000.0}, {3600.0}, {cell(1000.0, 3600.0, 0.0, false)});
        REQUIRE_THROWS_WITH(select_optimum(g, {}), ContainsSubstring("no valid cell"));
    }
    SECTION("max power below maintenance on a real sweep") {
        const auto c = load_building(test::model_path("bungalow.json"));
        const auto sim = simulator_for(c);
        const auto base = base_protocol(2.0, maintenance_power(sim, base_protocol(2.0, 0.0), 20.0));
        const auto ph = log_axis(base.initial_power, 3.0 * base.initial_power, 4);
        const std::vector<double> t{4.0 * 3600.0, 8.0 * 3600.0};
        const auto g = sweep(sim, base, ph, t, ErrorPolicy{}, sim.reference_H());
        DesignConstraints k;
        k.max_power = 0.9 * base.initial_power;
        REQUIRE_THROWS_AS(select_optimum(g, k), InfeasibleDesign);
        const auto d = select_optimum(g, {});
        CHECK(d.ph > base.initial_power);
    }
}

TEST_CASE("grid export") {
    const auto dir = std::filesystem::temp_directory_path() / "qubdoe_test_doe";
    std::filesystem::create_directories(dir);
    auto flagged = cell(2000.0, 7200.0, 0.0, false);
    flagged.eps_H_pct = kNaN;
    flagged.flag = "ill-posed slopes";
    auto good = cell(1000.0, 3600.0, 0.0123);
    good.H_qub = 52.5;
    good.eps_qub_pct = -0.004;
    good.eps_Hm = 0.61;
    const auto g = grid_of({1000.0, 2000.0}, {3600.0, 7200.0}, {good, cell(2000.0, 3600.0, 0.02), cell(1000.0, 7200.0, 0.01), flagged});
    const auto path = dir / "grid.csv";
    export_grid(g, path.string());
    const auto text = read_file(path);
    std::istringstream in(text);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "ph_W,t_qub_s,H_qub_W_per_K,eps_qub_pct,eps_Hm_W_per_K,eps_H_pct,theta_max_C,valid");
    CHECK(lines[1] == "1000,3600,52.5,-0.4,0.61,1.23,25,1");
    CHECK(lines[4].ends_with(",0"));
    CHECK(lines[4].find("nan") != std::string::npos);

    export_grid(g, path.string());
    CHECK(read_file(path) == text);
    CHECK_FALSE(std::filesystem::exists(dir / "grid.csv.tmp"));

    const auto missing = dir / "no_such_dir" / "grid.csv";
    REQUIRE_THROWS_AS(export_grid(g, missing.string()), InputError);
    CHECK_FALSE(std::filesystem::exists(missing));
    std::filesystem::remove_all(dir);
}
