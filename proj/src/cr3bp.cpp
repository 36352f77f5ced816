#include "lunamap/cr3bp.hpp"

#include <cmath>

namespace lunamap {

double jacobi_constant(const State& s, const SystemParams& p) {
    const double mu = p.mu;
    const double r1 = std::sqrt((s.x() + mu) * (s.x() + mu) + s.y() * s.y() + s.z() * s.z());
    const double r2 = std::sqrt((s.x() - 1.0 + mu) * (s.x() - 1.0 + mu) + s.y() * s.y() + s.z() * s.z());
    if (r1 == 0.0 || r2 == 0.0) throw DomainError("jacobi_constant: state at a primary's center");
    const double v2 = s.vx() * s.vx() + s.vy() * s.vy() + s.vz() * s.vz();
    return s.x() * s.x() + s.y() * s.y() + 2.0 * (1.0 - mu) / r1 + 2.0 * mu / r2 - v2;
}

namespace {

// Collinear equilibrium condition: x-acceleration of a body at rest on the
// x-axis. Signs of the displacement terms depend on the side of each primary.
double axis_accel(double x, double mu) {
    const double de = x + mu;
    const double dm = x - 1.0 + mu;
    return x - (1.0 - mu) * de / std::pow(std::abs(de), 3) - mu * dm / std::pow(std::abs(dm), 3);
}

double axis_accel_deriv(double x, double mu) {
    const double de = std::abs(x + mu);
    const double dm = std::abs(x - 1.0 + mu);
    return 1.0 + 2.0 * (1.0 - mu) / (de * de * de) + 2.0 * mu / (dm * dm * dm);
}

} // namespace

double libration_point(Libration which, const SystemParams& p) {
    validate(p);
    const double mu = p.mu;
    const double moon = 1.0 - mu;
    double lo, hi;
    if (which == Libration::L1) {
        lo = moon - 0.5;
        hi = moon - 1e-9;
    } else {
        lo = moon + 1e-9;
        hi = moon + 0.5;
    }
    double flo = axis_accel(lo, mu);
    double fhi = axis_accel(hi, mu);
    if (flo * fhi > 0.0) throw std::runtime_error("libration_point: root not bracketed");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = axis_accel(mid, mu);
        if (fmid == 0.0 || hi - lo < 1e-16) {
            lo = hi = mid;
            break;
        }
        if (flo * fmid < 0.0) {
            hi = mid;
            fhi = fmid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    // Newton polish squeezes the residual to machine level.
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 4; ++it) {
        x -= axis_accel(x, mu) / axis_accel_deriv(x, mu);
    }
    return x;
}

double LinearizedCoeffs::inplane_freq() const {
    const double disc = std::sqrt(9.0 * c2 * c2 - 8.0 * c2);
    return std::sqrt(0.5 * (disc - (c2 - 2.0)));
}

double LinearizedCoeffs::velocity_ratio() const {
    const double lam = inplane_freq();
    return (lam * lam + 1.0 + 2.0 * c2) / (2.0 * lam);
}

double LinearizedCoeffs::linear_period() const {
    return 2.0 * std::acos(-1.0) / inplane_freq();
}

LinearizedCoeffs linearized_coeffs(Libration which, const SystemParams& p) {
    const double mu = p.mu;
    const double x_l = libration_point(which, p);
    const double gamma = std::abs(x_l - (1.0 - mu));
    const double g3 = gamma * gamma * gamma;
    // Quadratic coefficient of the expanded potential at the point; the
    // denominator carries (1 -+ gamma) for L1 / L2 respectively.
    const double denom = (which == Libration::L1) ? (1.0 - gamma) : (1.0 + gamma);
    const double c2 = (mu + (1.0 - mu) * g3 / (denom * denom * denom)) / g3;
    if (c2 <= 1.0) throw DomainError("linearized_coeffs: c2 <= 1, no periodic mode");
    return {c2, gamma};
}

State lyapunov_linear_seed(Libration which, double amplitude, const SystemParams& p) {
    const auto lin = linearized_coeffs(which, p);
    const double x_l = libration_point(which, p);
    State s{};
    s[0] = x_l + amplitude;
    s[4] = -amplitude * lin.inplane_freq() * lin.velocity_ratio();
    return s;
}

} // namespace lunamap
