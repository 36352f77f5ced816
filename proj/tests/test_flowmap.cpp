#include <doctest.h>

#include <cmath>

#include "lunamap/flowmap.hpp"
#include "lunamap/rk4.hpp"
#include "lunamap/variational.hpp"

using namespace lunamap;

namespace {

const SystemParams kEarthMoon{};

struct Fixture {
    FamilyTable table;
    GlobalModel model;
    double op_point = 0.0;
    double trust = 0.0;
    SeriesState init;   // order 5
    FlowMap nmap;       // normalized, ns = 1000
    FlowMap tmap;       // absolute over one op-point period
};

const Fixture& fx() {
    static const Fixture fixture = [] {
        Fixture f;
        const OrbitMember seed = correct_half_period(
            lyapunov_linear_seed(Libration::L1, 0.01, kEarthMoon), FamilyId::L1Lyapunov, kEarthMoon);
        SweepOptions sweep;
        sweep.count = 120;
        f.table = generate_family(seed, 2e-3, sweep, kEarthMoon);
        f.model = fit_global(f.table, 2, 10);
        f.op_point = f.table.members[60].kappa;
        f.trust = 0.25 * (f.model.kappa_max - f.model.kappa_min) / 2.0 * 2.0; // half region width
        f.init = to_series(f.model, f.op_point, 5);
        f.nmap = build_normalized_map(f.init, 1000, f.trust, f.table.family, kEarthMoon);

        const double t_hat = f.init.period.evaluate({0.0});
        std::vector<double> grid(1001);
        for (int j = 0; j <= 1000; ++j) grid[j] = t_hat * j / 1000.0;
        f.tmap = build_time_map(f.init, grid, 1000, f.trust, f.table.family, kEarthMoon);
        return f;
    }();
    return fixture;
}

State pointwise_member(double kappa, double fraction_of_period, int nsteps) {
    const ModelState ms = evaluate_model(fx().model, kappa);
    const auto f = [](const State& s) { return cr3bp_rhs(s, kEarthMoon); };
    return rk4_propagate(f, ms.x0, ms.period * fraction_of_period, nsteps);
}

} // namespace

TEST_SUITE("flowmap") {

TEST_CASE("map constant part equals the op-member pointwise flow") {
    const auto& f = fx();
    const ModelState op = evaluate_model(f.model, f.op_point);
    const auto rhs = [](const State& s) { return cr3bp_rhs(s, kEarthMoon); };
    for (std::size_t j : {std::size_t(100), std::size_t(500), std::size_t(1000)}) {
        const State from_map = f.nmap.frame_state(j, 0.0);
        const State direct = rk4_propagate(rhs, op.x0, op.period * f.nmap.grid[j],
                                           static_cast<int>(j));
        for (int i = 0; i < 6; ++i) {
            CHECK(std::abs(from_map[i] - direct[i]) < 1e-10);
        }
    }
}

TEST_CASE("taylor remainder shrinks at the expected order when dkappa halves") {
    const auto& f = fx();
    const int order = 5;
    const double eta = 0.6;
    auto map_error = [&](double dk) {
        const State mapped = query_state(f.nmap, dk, eta, kEarthMoon).state;
        const ModelState ms = evaluate_model(f.model, f.op_point + dk);
        const auto rhs = [](const State& s) { return cr3bp_rhs(s, kEarthMoon); };
        // Same stepping as the map: eta * ns steps of the member's own h.
        const int steps = static_cast<int>(std::lround(eta * f.nmap.ns));
        const State direct = rk4_propagate(rhs, ms.x0, ms.period * eta, steps);
        double e = 0.0;
        for (int i = 0; i < 6; ++i) e = std::max(e, std::abs(mapped[i] - direct[i]));
        return e;
    };
    const double e1 = map_error(1e-2);
    const double e2 = map_error(5e-3);
    const double e3 = map_error(2.5e-3);
    const double expected = std::pow(2.0, order + 1);
    CHECK(e1 / e2 > expected / 2.0);
    CHECK(e1 / e2 < expected * 2.0);
    CHECK(e2 / e3 > expected / 2.0);
    CHECK(e2 / e3 < expected * 2.0);
}

TEST_CASE("first-order coefficients match the family sensitivity") {
    const auto& f = fx();
    const double eps = 1e-6;

    SUBCASE("central differences over kappa") {
        for (std::size_t j : {std::size_t(300), std::size_t(800)}) {
            const double eta = f.nmap.grid[j];
            const State plus = pointwise_member(f.op_point + eps, eta, static_cast<int>(j));
            const State minus = pointwise_member(f.op_point - eps, eta, static_cast<int>(j));
            for (int i = 0; i < 6; ++i) {
                const double fd = (plus[i] - minus[i]) / (2.0 * eps);
                const double coeff = f.nmap.frames[j][i].coeff({1});
                const double scale = std::max(1.0, std::abs(fd));
                CHECK(std::abs(coeff - fd) / scale < 1e-5);
            }
        }
    }
    SUBCASE("absolute-time first order equals STM times the seed sensitivity") {
        const std::size_t j = 400;
        const double t = f.tmap.grid[j];
        const ModelState op = evaluate_model(f.model, f.op_point);
        const auto aug = propagate_with_stm(op.x0, t, static_cast<int>(j), kEarthMoon);
        for (int i = 0; i < 6; ++i) {
            double expected = 0.0;
            for (int c = 0; c < 6; ++c) {
                expected += aug.stm(i, c) * f.init.state[c].coeff({1});
            }
            const double got = f.tmap.frames[j][i].coeff({1});
            CHECK(std::abs(got - expected) < 1e-6 * std::max(1.0, std::abs(expected)));
        }
    }
}

TEST_CASE("normalized map closes after one period across the family") {
    const auto& f = fx();
    for (double dk : {-f.trust * 0.8, -1e-3, 0.0, 1e-3, f.trust * 0.8}) {
        const State start = f.nmap.frame_state(0, dk);
        const State end = f.nmap.frame_state(f.nmap.frames.size() - 1, dk);
        for (int i = 0; i < 6; ++i) {
            CHECK(std::abs(end[i] - start[i]) < 1e-6);
        }
    }
    SUBCASE("eta=1 and eta=0 frames agree as polynomials below the top order") {
        const auto& first = f.nmap.frames.front();
        const auto& last = f.nmap.frames.back();
        for (int i = 0; i < 6; ++i) {
            const Tps diff = last[i] - first[i];
            for (const auto& [e, c] : diff.terms()) {
                if (total_degree(e) <= f.nmap.order - 1) {
                    CHECK(std::abs(c * std::pow(f.trust, total_degree(e))) < 1e-5);
                }
            }
        }
    }
}

TEST_CASE("normalized dkappa=0 slice matches the absolute map") {
    const auto& f = fx();
    // Rebuild the absolute map with zero trust so the step is exactly the
    // op-point period over ns, matching the normalized stepping at dkappa=0.
    const double t_hat = f.init.period.evaluate({0.0});
    std::vector<double> grid(11);
    for (int j = 0; j <= 10; ++j) grid[j] = t_hat * j / 10.0;
    const FlowMap tmap0 = build_time_map(f.init, grid, 1000, 0.0, f.table.family, kEarthMoon);
    for (int j = 0; j <= 10; ++j) {
        const State a = tmap0.frame_state(j, 0.0);
        const State n = f.nmap.frame_state(100 * j, 0.0);
        for (int i = 0; i < 6; ++i) CHECK(std::abs(a[i] - n[i]) < 1e-10);
    }
}

TEST_CASE("fixed normalized-time loci are tighter than fixed-time loci") {
    const auto& f = fx();
    const double t_hat = f.init.period.evaluate({0.0});
    auto spread = [&](bool normalized) {
        double worst = 0.0;
        std::vector<State> pts;
        for (int i = -5; i <= 5; ++i) {
            const double dk = f.trust * i / 5.0;
            if (normalized) {
                pts.push_back(query_state(f.nmap, dk, 0.9, kEarthMoon).state);
            } else {
                pts.push_back(query_state(f.tmap, dk, 0.9 * t_hat, kEarthMoon).state);
            }
        }
        for (std::size_t a = 0; a < pts.size(); ++a) {
            for (std::size_t b = a + 1; b < pts.size(); ++b) {
                const double d = std::hypot(pts[a].x() - pts[b].x(), pts[a].y() - pts[b].y(),
                                            pts[a].z() - pts[b].z());
                worst = std::max(worst, d);
            }
        }
        return worst;
    };
    CHECK(spread(true) < spread(false));
}

TEST_CASE("query interpolation against a dense-grid reference") {
    const auto& f = fx();

    SUBCASE("grid instants evaluate directly") {
        const double eta = f.nmap.grid[321];
        const State q = query_state(f.nmap, 2e-3, eta, kEarthMoon).state;
        const State direct = f.nmap.frame_state(321, 2e-3);
        for (int i = 0; i < 6; ++i) CHECK(q[i] == direct[i]);
    }
    SUBCASE("mid-interval error against a 10x denser map") {
        const FlowMap dense = build_normalized_map(f.init, 10000, f.trust, f.table.family, kEarthMoon);
        for (double eta : {0.20005, 0.64315, 0.90035}) {
            const State coarse = query_state(f.nmap, 3e-3, eta, kEarthMoon).state;
            const State fine = query_state(dense, 3e-3, eta, kEarthMoon).state;
            for (int i = 0; i < 6; ++i) CHECK(std::abs(coarse[i] - fine[i]) < 1e-8);
        }
    }
    SUBCASE("symmetric member crosses the plane at half period") {
        const State q = query_state(f.nmap, 0.0, 0.5, kEarthMoon).state;
        CHECK(std::abs(q.y()) < 1e-6);
    }
    SUBCASE("out-of-span instants are rejected") {
        CHECK_THROWS_AS(query_state(f.nmap, 0.0, 1.5, kEarthMoon), DomainError);
        CHECK_THROWS_AS(query_state(f.tmap, 0.0, -0.1, kEarthMoon), DomainError);
    }
    SUBCASE("beyond-trust queries carry a warning") {
        CHECK_FALSE(query_state(f.nmap, 2.0 * f.trust, 0.5, kEarthMoon).within_trust);
        CHECK(query_state(f.nmap, 0.5 * f.trust, 0.5, kEarthMoon).within_trust);
    }
}

TEST_CASE("time to normalized time") {
    const auto& f = fx();
    const double dk = 1.5e-3;
    const double period = f.nmap.period_map.evaluate({dk});
    CHECK(time_to_eta(f.nmap, dk, period) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(time_to_eta(f.nmap, dk, 0.0) == 0.0);

    SUBCASE("round trip against pointwise propagation") {
        const double t = 0.37 * period;
        const double eta = time_to_eta(f.nmap, dk, t);
        const State q = query_state(f.nmap, dk, eta, kEarthMoon).state;
        const int steps = 1000;
        const ModelState ms = evaluate_model(f.model, f.op_point + dk);
        const auto rhs = [](const State& s) { return cr3bp_rhs(s, kEarthMoon); };
        const State direct = rk4_propagate(rhs, ms.x0, t, steps);
        for (int i = 0; i < 6; ++i) CHECK(std::abs(q[i] - direct[i]) < 1e-6);
    }
    SUBCASE("absolute-mode maps refuse the conversion") {
        CHECK_THROWS_AS(time_to_eta(f.tmap, 0.0, 1.0), std::invalid_argument);
    }
}

TEST_CASE("nearest member search") {
    const auto& f = fx();

    SUBCASE("a manifold point is recovered") {
        const double dk = 2.5e-3, eta = 0.31;
        const State s = query_state(f.nmap, dk, eta, kEarthMoon).state;
        const NearestResult r = nearest_member(f.nmap, {s.x(), s.y(), s.z()}, kEarthMoon);
        CHECK(r.distance < 1e-8);
        CHECK(std::abs(r.dkappa - dk) < 2.0 * f.trust / 50.0);
        CHECK(std::abs(r.eta - eta) < 2.0 / 1000.0);
    }
    SUBCASE("a displaced point reports its offset") {
        const State s = query_state(f.nmap, 1e-3, 0.42, kEarthMoon).state;
        const NearestResult r =
            nearest_member(f.nmap, {s.x(), s.y(), s.z() + 1e-4}, kEarthMoon);
        CHECK(r.distance == doctest::Approx(1e-4).epsilon(0.05));
    }
    SUBCASE("hints reproduce the full search") {
        const State s = query_state(f.nmap, -2e-3, 0.77, kEarthMoon).state;
        const NearestResult full = nearest_member(f.nmap, {s.x(), s.y(), s.z()}, kEarthMoon);
        NearestResult h;
        h.dkappa = -2e-3 + 1e-4;
        h.eta = 0.77 - 5e-4;
        const NearestResult hinted = nearest_member(f.nmap, {s.x(), s.y(), s.z()}, kEarthMoon, &h);
        CHECK(std::abs(full.dkappa - hinted.dkappa) < 1e-6);
        CHECK(std::abs(full.eta - hinted.eta) < 1e-6);
    }
}

TEST_CASE("flow map json round trip") {
    const auto& f = fx();
    // A small map keeps the payload light.
    const FlowMap small = build_normalized_map(f.init, 16, f.trust, f.table.family, kEarthMoon);
    const FlowMap back = flow_map_from_json_string(to_json_string(small));
    CHECK(back.mode == small.mode);
    CHECK(back.kappa_hat == small.kappa_hat);
    CHECK(back.ns == small.ns);
    CHECK(back.trust_radius == small.trust_radius);
    REQUIRE(back.frames.size() == small.frames.size());
    for (std::size_t j = 0; j < small.frames.size(); ++j) {
        for (int i = 0; i < 6; ++i) CHECK(back.frames[j][i] == small.frames[j][i]);
    }
    CHECK(back.period_map == small.period_map);

    std::string text = to_json_string(small);
    const auto pos = text.find("\"schema_version\":1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 18, "\"schema_version\":9");
    CHECK_THROWS_AS(flow_map_from_json_string(text), std::invalid_argument);
}

} // TEST_SUITE
