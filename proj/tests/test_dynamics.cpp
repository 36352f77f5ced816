#include <doctest.h>

#include <cmath>

#include "lunamap/cr3bp.hpp"
#include "lunamap/rk4.hpp"
#include "lunamap/state.hpp"
#include "lunamap/tps.hpp"
#include "lunamap/variational.hpp"

using namespace lunamap;

namespace {

const SystemParams kEarthMoon{};

// Test-side equilibrium oracle: plain bisection on the x-axis force balance,
// written independently of the implementation's solver.
double bisect_equilibrium(double lo, double hi, double mu) {
    auto fx = [mu](double x) {
        const double r1 = std::abs(x + mu);
        const double r2 = std::abs(x - 1.0 + mu);
        return x - (1.0 - mu) * (x + mu) / (r1 * r1 * r1) - mu * (x - 1.0 + mu) / (r2 * r2 * r2);
    };
    double flo = fx(lo);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = fx(mid);
        if (flo * fm <= 0.0) {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    return 0.5 * (lo + hi);
}

State flow(const State& s, double t, int nsteps, const SystemParams& p) {
    return rk4_propagate([&p](const State& q) { return cr3bp_rhs(q, p); }, s, t, nsteps);
}

State small_l1_seed() { return lyapunov_linear_seed(Libration::L1, 0.01, kEarthMoon); }

} // namespace

TEST_SUITE("dynamics") {

TEST_CASE("libration points agree with the bisection oracle") {
    const double mu = kEarthMoon.mu;
    const double x1 = libration_point(Libration::L1, kEarthMoon);
    const double x2 = libration_point(Libration::L2, kEarthMoon);

    CHECK(x1 == doctest::Approx(bisect_equilibrium(1.0 - mu - 0.5, 1.0 - mu - 1e-9, mu)).epsilon(1e-12));
    CHECK(x2 == doctest::Approx(bisect_equilibrium(1.0 - mu + 1e-9, 1.0 - mu + 0.5, mu)).epsilon(1e-12));
    CHECK(x1 == doctest::Approx(0.8369).epsilon(1e-3));
    CHECK(x2 == doctest::Approx(1.1557).epsilon(1e-3));
    CHECK(x1 < 1.0 - mu);
    CHECK(1.0 - mu < x2);

    // Residual of the equilibrium condition at the returned points.
    for (double x : {x1, x2}) {
        State s{};
        s[0] = x;
        const State a = cr3bp_rhs(s, kEarthMoon);
        CHECK(std::abs(a.vx()) < 1e-13);
        CHECK(std::abs(a.vy()) < 1e-13);
        CHECK(std::abs(a.vz()) < 1e-13);
    }
}

TEST_CASE("equilibrium acceleration vanishes at L1") {
    State s{};
    s[0] = libration_point(Libration::L1, kEarthMoon);
    const State a = cr3bp_rhs(s, kEarthMoon);
    const double mag = std::sqrt(a[3] * a[3] + a[4] * a[4] + a[5] * a[5]);
    CHECK(mag < 1e-10);
}

TEST_CASE("planar states stay exactly planar") {
    State s = small_l1_seed();
    const State a = cr3bp_rhs(s, kEarthMoon);
    CHECK(a.vz() == 0.0);

    const State end = flow(s, 2.0, 700, kEarthMoon);
    CHECK(end.z() == 0.0);
    CHECK(end.vz() == 0.0);
}

TEST_CASE("series propagation constant part matches the pointwise flow") {
    const int order = 4;
    const State s0 = small_l1_seed();
    Vec6<Tps> ts;
    for (int i = 0; i < 6; ++i) ts[i] = Tps(s0[i], 1, order);
    ts[0] = ts[0] + Tps::variable(0, 1, order); // expand in the x-offset

    const auto rhs_tps = cr3bp_rhs(ts, kEarthMoon);
    const auto rhs_real = cr3bp_rhs(s0, kEarthMoon);
    for (int i = 0; i < 6; ++i) {
        CHECK(rhs_tps[i].constant_part() == doctest::Approx(rhs_real[i]).epsilon(1e-14));
    }
}

TEST_CASE("jacobi constant basics and conservation") {
    const SystemParams& p = kEarthMoon;

    SUBCASE("rest state at L1 equals the direct formula") {
        State s{};
        s[0] = libration_point(Libration::L1, p);
        const double r1 = std::abs(s[0] + p.mu);
        const double r2 = std::abs(s[0] - 1.0 + p.mu);
        const double direct = s[0] * s[0] + 2.0 * (1.0 - p.mu) / r1 + 2.0 * p.mu / r2;
        CHECK(jacobi_constant(s, p) == doctest::Approx(direct).epsilon(1e-15));
    }
    SUBCASE("speed enters squared") {
        State s = small_l1_seed();
        State m = s;
        m[5] = -m[5];
        CHECK(jacobi_constant(s, p) == jacobi_constant(m, p));
    }
    SUBCASE("drift over one orbit-scale arc is below 1e-9 at 1000 steps") {
        const State s = small_l1_seed();
        const double c0 = jacobi_constant(s, p);
        const double t = linearized_coeffs(Libration::L1, p).linear_period();
        const State end = flow(s, t, 1000, p);
        CHECK(std::abs(jacobi_constant(end, p) - c0) < 1e-9);
    }
}

TEST_CASE("rk4 identities and convergence order") {
    const SystemParams& p = kEarthMoon;
    const State s = small_l1_seed();

    SUBCASE("zero span returns the input unchanged") {
        const State r = flow(s, 0.0, 5, p);
        for (int i = 0; i < 6; ++i) CHECK(r[i] == s[i]);
    }
    SUBCASE("error shrinks 16x per step-count doubling") {
        const double t = 2.5;
        const State ref = flow(s, t, 16000, p);
        double prev_err = -1.0;
        for (int n : {250, 500, 1000}) {
            const State got = flow(s, t, n, p);
            double err = 0.0;
            for (int i = 0; i < 6; ++i) err = std::max(err, std::abs(got[i] - ref[i]));
            if (prev_err > 0.0) {
                const double ratio = prev_err / err;
                CHECK(ratio > 8.0);
                CHECK(ratio < 32.0);
            }
            prev_err = err;
        }
    }
}

TEST_CASE("linear seed reduces to the libration point at zero amplitude") {
    const State s = lyapunov_linear_seed(Libration::L2, 0.0, kEarthMoon);
    CHECK(s[0] == libration_point(Libration::L2, kEarthMoon));
    for (int i = 1; i < 6; ++i) CHECK(s[i] == 0.0);
}

TEST_CASE("linearized model tracks the nonlinear flow to second order in amplitude") {
    const SystemParams& p = kEarthMoon;
    const auto lin = linearized_coeffs(Libration::L1, p);
    const double x_l = libration_point(Libration::L1, p);
    const double lam = lin.inplane_freq();
    const double k = lin.velocity_ratio();
    const double t_lin = lin.linear_period();

    auto max_deviation = [&](double amp) {
        const State seed = lyapunov_linear_seed(Libration::L1, amp, p);
        double worst = 0.0;
        const int samples = 40;
        for (int j = 1; j <= samples; ++j) {
            const double t = t_lin * j / samples;
            const State nl = flow(seed, t, 1000, p);
            const double xl = x_l + amp * std::cos(lam * t);
            const double yl = -amp * k * std::sin(lam * t);
            worst = std::max(worst, std::hypot(nl.x() - xl, nl.y() - yl));
        }
        return worst;
    };

    const double d1 = max_deviation(0.008);
    const double d2 = max_deviation(0.004);
    const double ratio = d1 / d2;
    CHECK(ratio > 2.5); // quadratic scaling, loose bounds
    CHECK(ratio < 6.0);
}

TEST_CASE("stm initial condition and finite-difference oracle") {
    const SystemParams& p = kEarthMoon;
    const State s = small_l1_seed();

    SUBCASE("identity at t = 0") {
        AugmentedState a{s, Mat6::Identity()};
        CHECK((a.stm - Mat6::Identity()).norm() == 0.0);
    }
    SUBCASE("columns match central differences") {
        const double t = 1.3;
        const int nsteps = 650;
        const auto aug = propagate_with_stm(s, t, nsteps, p);
        const double eps = 1e-7;
        for (int j = 0; j < 6; ++j) {
            State plus = s, minus = s;
            plus[j] += eps;
            minus[j] -= eps;
            const State fp = flow(plus, t, nsteps, p);
            const State fm = flow(minus, t, nsteps, p);
            for (int i = 0; i < 6; ++i) {
                const double fd = (fp[i] - fm[i]) / (2.0 * eps);
                const double scale = std::max(1.0, std::abs(fd));
                CHECK(std::abs(aug.stm(i, j) - fd) / scale < 1e-5);
            }
        }
    }
    SUBCASE("planar flow decouples the out-of-plane block") {
        const auto aug = propagate_with_stm(s, 1.0, 500, p);
        for (int i : {0, 1, 3, 4}) {
            for (int j : {2, 5}) {
                CHECK(std::abs(aug.stm(i, j)) < 1e-12);
                CHECK(std::abs(aug.stm(j, i)) < 1e-12);
            }
        }
    }
    SUBCASE("volume is preserved along the flow") {
        const auto aug = propagate_with_stm(s, 2.5, 1250, p);
        CHECK(std::abs(aug.stm.determinant() - 1.0) < 1e-6);
    }
}

TEST_CASE("flow commutes with the mirror symmetry") {
    const SystemParams& p = kEarthMoon;
    State s = small_l1_seed();
    s[1] = 0.01; // move off the symmetry plane
    s[3] = 0.005;

    auto mirror = [](State q) {
        q[1] = -q[1];
        q[3] = -q[3];
        q[5] = -q[5];
        return q;
    };

    const double t = 1.7;
    const State fwd = flow(s, t, 900, p);
    const State back_of_mirror = flow(mirror(s), -t, 900, p);
    const State mirrored = mirror(back_of_mirror);
    for (int i = 0; i < 6; ++i) {
        CHECK(std::abs(fwd[i] - mirrored[i]) < 1e-10);
    }
}

TEST_CASE("plane crossing detection refines to 1e-12") {
    const SystemParams& p = kEarthMoon;
    const State s = small_l1_seed();
    const double t_lin = linearized_coeffs(Libration::L1, p).linear_period();
    const auto cross = propagate_to_plane_crossing(s, p, t_lin / 1000, 2.0 * t_lin);
    CHECK(std::abs(cross.state.y()) < 1e-12);
    CHECK(cross.time > 0.25 * t_lin);
    CHECK(cross.time < 0.75 * t_lin);
}

TEST_CASE("rpow rejects a state at the Moon's center") {
    State s{};
    s[0] = 1.0 - kEarthMoon.mu; // exactly at the secondary
    CHECK_THROWS_AS(cr3bp_rhs(s, kEarthMoon), DomainError);
}

} // TEST_SUITE
