#pragma once

#include "lunamap/errors.hpp"
#include "lunamap/state.hpp"
#include "lunamap/tps.hpp"

namespace lunamap {

// Dimensionless mass of the secondary (Earth-Moon by default).
struct SystemParams {
    double mu = 0.01215;
};

inline void validate(const SystemParams& p) {
    if (!(p.mu > 0.0 && p.mu < 0.5)) throw DomainError("SystemParams: mu must lie in (0, 0.5)");
}

enum class Libration { L1, L2 };

// Rotating-frame equations of motion. Written once over a generic scalar:
// the inverse-cube terms go through rpow, which rejects states at a
// primary's center via its positive-constant-part requirement.
template <class S>
Vec6<S> cr3bp_rhs(const Vec6<S>& s, const SystemParams& p) {
    const double mu = p.mu;
    const S& x = s.x();
    const S& y = s.y();
    const S& z = s.z();

    const S xe = x + mu;         // offset from Earth at (-mu, 0, 0)
    const S xm = x - (1.0 - mu); // offset from Moon at (1-mu, 0, 0)
    const S yz2 = y * y + z * z;
    const S r1m3 = rpow(xe * xe + yz2, -1.5);
    const S r2m3 = rpow(xm * xm + yz2, -1.5);

    Vec6<S> out;
    out[0] = s.vx();
    out[1] = s.vy();
    out[2] = s.vz();
    out[3] = 2.0 * s.vy() + x - (1.0 - mu) * (xe * r1m3) - mu * (xm * r2m3);
    out[4] = -2.0 * s.vx() + y - (1.0 - mu) * (y * r1m3) - mu * (y * r2m3);
    out[5] = -(1.0 - mu) * (z * r1m3) - mu * (z * r2m3);
    return out;
}

// First integral C = x^2 + y^2 + 2(1-mu)/r1 + 2mu/r2 - v^2; conserved along
// the flow, used throughout as a propagation-accuracy oracle.
double jacobi_constant(const State& s, const SystemParams& p);

// x-coordinate of the collinear equilibrium on the requested side of the
// Moon; the residual of the equilibrium condition is below 1e-13.
double libration_point(Libration which, const SystemParams& p);

// Linearization data at a collinear point. gamma_l is the libration-point
// to Moon distance over the Earth-Moon distance; c2 > 1 at L1/L2, which is
// what gives the saddle x center structure the seeds rely on.
struct LinearizedCoeffs {
    double c2 = 0.0;
    double gamma_l = 0.0;

    // In-plane center frequency and the eigenvector velocity ratio.
    double inplane_freq() const;
    double velocity_ratio() const;
    double linear_period() const;
};

LinearizedCoeffs linearized_coeffs(Libration which, const SystemParams& p);

// Planar periodic seed of the linearized model: x0 = xL + amplitude, y0 = 0,
// ydot0 from the center eigenmode. Feed to the differential corrector.
State lyapunov_linear_seed(Libration which, double amplitude, const SystemParams& p);

} // namespace lunamap
