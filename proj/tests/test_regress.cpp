#include <doctest.h>

#include <cmath>

#include "lunamap/pipeline.hpp"
#include "lunamap/regress.hpp"
#include "lunamap/rk4.hpp"

using namespace lunamap;

namespace {

const SystemParams kEarthMoon{};

const FamilyTable& l1_table() {
    static const FamilyTable table = [] {
        const OrbitMember seed = correct_half_period(
            lyapunov_linear_seed(Libration::L1, 0.01, kEarthMoon), FamilyId::L1Lyapunov, kEarthMoon);
        SweepOptions sweep;
        sweep.count = 60;
        return generate_family(seed, 1e-3, sweep, kEarthMoon);
    }();
    return table;
}

FamilyTable synthetic_linear_table() {
    FamilyTable t;
    t.family = FamilyId::L1Lyapunov;
    t.mu = kEarthMoon.mu;
    for (int i = 0; i < 3; ++i) {
        OrbitMember m;
        m.kappa = 0.8 + 0.01 * i;
        m.x0[0] = m.kappa;
        m.x0[4] = -0.5 + 2.0 * m.kappa; // exactly linear in kappa
        m.period = 3.0 + 0.1 * m.kappa;
        m.family = t.family;
        t.members.push_back(m);
    }
    return t;
}

} // namespace

TEST_SUITE("regress") {

TEST_CASE("linear data with a linear model fits exactly") {
    const GlobalModel model = fit_global(synthetic_linear_table(), 1, 1);
    REQUIRE(model.regions.size() == 1);
    CHECK(model.regions[0].rms_ydot0 < 1e-14);
    CHECK(model.regions[0].rms_period < 1e-14);

    const ModelState at = evaluate_model(model, 0.805);
    CHECK(at.x0.vy() == doctest::Approx(-0.5 + 2.0 * 0.805).epsilon(1e-13));
    CHECK(at.x0.x() == 0.805);
    CHECK(at.x0.y() == 0.0);
}

TEST_CASE("global fit reproduces training members") {
    const GlobalModel model = fit_global(l1_table(), 2, 10);
    for (const auto& m : l1_table().members) {
        const ModelState got = evaluate_model(model, m.kappa);
        CHECK(std::abs(got.x0.vy() - m.x0.vy()) < 1e-9);
        CHECK(std::abs(got.period - m.period) < 1e-9);
    }
    for (const auto& reg : model.regions) {
        CHECK(reg.rms_ydot0 < 1e-9);
        CHECK(reg.rms_period < 1e-9);
        CHECK(reg.lower < reg.op_point);
        CHECK(reg.op_point < reg.upper);
    }
}

TEST_CASE("regions partition the domain with a single activation") {
    const GlobalModel model = fit_global(l1_table(), 4, 8);
    for (double f : {0.0, 0.13, 0.29, 0.48, 0.5, 0.73, 0.97, 1.0}) {
        const double kappa = model.kappa_min + f * (model.kappa_max - model.kappa_min);
        int active = 0;
        for (std::size_t i = 0; i < model.regions.size(); ++i) {
            const auto& r = model.regions[i];
            const bool last = i + 1 == model.regions.size();
            const bool on = kappa >= r.lower && (kappa < r.upper || (last && kappa <= r.upper));
            active += on ? 1 : 0;
        }
        CHECK(active == 1);
        CHECK(model.region_index(kappa) < model.regions.size());
    }
    CHECK_THROWS_AS(evaluate_model(model, model.kappa_max + 1e-6), DomainError);
    CHECK_THROWS_AS(evaluate_model(model, model.kappa_min - 1e-6), DomainError);
}

TEST_CASE("adjacent regions agree at their shared boundary") {
    const GlobalModel model = fit_global(l1_table(), 3, 10);
    for (std::size_t i = 0; i + 1 < model.regions.size(); ++i) {
        const double b = model.regions[i].upper;
        const ModelState left = evaluate_model(model, b - 1e-9);
        const ModelState right = evaluate_model(model, b + 1e-9);
        CHECK(std::abs(left.x0.vy() - right.x0.vy()) < 1e-7);
        CHECK(std::abs(left.period - right.period) < 1e-7);
    }
}

TEST_CASE("refitting model samples reproduces the coefficients") {
    const GlobalModel model = fit_global(l1_table(), 2, 8);

    FamilyTable resampled = l1_table();
    for (auto& m : resampled.members) {
        const ModelState ms = evaluate_model(model, m.kappa);
        m.x0 = ms.x0;
        m.period = ms.period;
    }
    const GlobalModel refit = fit_global(resampled, 2, 8);
    REQUIRE(refit.regions.size() == model.regions.size());
    for (std::size_t r = 0; r < model.regions.size(); ++r) {
        const auto& a = model.regions[r].coeff_ydot0;
        const auto& b = refit.regions[r].coeff_ydot0;
        REQUIRE(a.size() == b.size());
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            num += (a[k] - b[k]) * (a[k] - b[k]);
            den += a[k] * a[k];
        }
        CHECK(std::sqrt(num / den) < 1e-8);
    }
}

TEST_CASE("fit errors are specific") {
    SUBCASE("underdetermined region names itself") {
        CHECK_THROWS_WITH_AS(fit_global(l1_table(), 30, 10, {}),
                             doctest::Contains("region"), FitError);
    }
    SUBCASE("non-monotone parameter is refused") {
        FamilyTable folded = synthetic_linear_table();
        folded.members.push_back(folded.members[1]);
        CHECK_THROWS_AS(fit_global(folded, 1, 1), FitError);
    }
}

TEST_CASE("model midpoint states close after one period") {
    const GlobalModel model = fit_global(l1_table(), 2, 10);
    const auto& members = l1_table().members;
    const double kappa = 0.5 * (members[20].kappa + members[21].kappa);
    const ModelState ms = evaluate_model(model, kappa);
    const auto f = [&](const State& s) { return cr3bp_rhs(s, kEarthMoon); };
    const State ret = rk4_propagate(f, ms.x0, ms.period, 1000);
    for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(ret[c] - ms.x0[c]) < 1e-6);
    }
}

TEST_CASE("local model expands about the designed member") {
    const LocalModel model = fit_local(l1_table(), 30, 15, 6);
    const auto& designed = l1_table().members[30];

    const ModelState at = evaluate_model(model, designed.kappa);
    CHECK(std::abs(at.x0.vy() - designed.x0.vy()) < 1e-12);
    CHECK(std::abs(at.period - designed.period) < 1e-12);
    CHECK(model.window_lo < model.op_point);
    CHECK(model.window_hi > model.op_point);

    CHECK_THROWS_AS(fit_local(l1_table(), 30, 4, 6), std::invalid_argument);
}

TEST_CASE("local models win near the designed member and fail far away") {
    // Needs a domain wide enough that a moderate global fit carries visible
    // structure error; the local window then beats it in its neighbourhood.
    PipelineOptions opts;
    opts.regions = 4;
    opts.degree = 8;
    static const FamilyTable table = [] {
        PipelineOptions build_opts;
        return build_family(FamilyId::L2Lyapunov, build_opts); // 500 members
    }();
    const GlobalModel model = fit_family(table, opts);
    const std::size_t designed = table.members.size() / 2;
    const int window = 21;
    const auto rows = run_global_local(table, model, designed, window, 14, 60, opts);

    const double op = table.members[designed].kappa;
    const double span = std::abs(table.members[designed + window / 2].kappa -
                                 table.members[designed - window / 2].kappa);
    int near_checked = 0, far_checked = 0;
    for (const auto& row : rows) {
        const double dk = std::abs(row.kappa - op);
        if (dk < span / 4.0 && dk > 1e-6) {
            CHECK(row.err_local < row.err_global);
            ++near_checked;
        }
        if (dk > 2.0 * span) {
            CHECK(row.err_local > 1e-2);
            CHECK(row.err_global < 1e-4);
            ++far_checked;
        }
    }
    CHECK(near_checked > 0);
    CHECK(far_checked > 0);
}

TEST_CASE("series expansion of the model") {
    const GlobalModel model = fit_global(l1_table(), 2, 10);
    const double op = l1_table().members[25].kappa;
    const int order = 5;
    const SeriesState series = to_series(model, op, order);

    SUBCASE("constant part equals the model at the operating point") {
        const ModelState at = evaluate_model(model, op);
        for (int i = 0; i < 6; ++i) {
            CHECK(series.state[i].evaluate({0.0}) == doctest::Approx(at.x0[i]).epsilon(1e-14));
        }
        CHECK(series.period.evaluate({0.0}) == doctest::Approx(at.period).epsilon(1e-14));
    }
    SUBCASE("planar family leaves the z channel identically zero") {
        CHECK(series.state[2].is_zero());
        CHECK(series.state[5].is_zero());
        CHECK(series.state[1].is_zero());
        CHECK(series.state[3].is_zero());
    }
    SUBCASE("series evaluation converges at the truncation order") {
        // Compare against direct model evaluation; halving the deviation must
        // shrink the remainder by about 2^(order+1).
        const double d1 = 2e-3, d2 = 1e-3;
        const double e1 = std::abs(series.state[4].evaluate({d1}) - evaluate_model(model, op + d1).x0.vy());
        const double e2 = std::abs(series.state[4].evaluate({d2}) - evaluate_model(model, op + d2).x0.vy());
        if (e2 > 1e-15) { // guard against the noise floor
            const double ratio = e1 / e2;
            CHECK(ratio > std::pow(2.0, order + 1) / 3.0);
            CHECK(ratio < std::pow(2.0, order + 1) * 3.0);
        }
    }
    SUBCASE("x channel is the identity offset") {
        CHECK(series.state[0].evaluate({1e-3}) == doctest::Approx(op + 1e-3).epsilon(1e-14));
    }
}

} // TEST_SUITE
