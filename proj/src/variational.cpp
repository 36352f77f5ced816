#include "lunamap/variational.hpp"

#include <cmath>

#include "lunamap/rk4.hpp"

namespace lunamap {

Mat6 cr3bp_jacobian(const State& s, const SystemParams& p) {
    const double mu = p.mu;
    const double xe = s.x() + mu;
    const double xm = s.x() - 1.0 + mu;
    const double y = s.y();
    const double z = s.z();

    const double r1sq = xe * xe + y * y + z * z;
    const double r2sq = xm * xm + y * y + z * z;
    if (r1sq == 0.0 || r2sq == 0.0) throw DomainError("cr3bp_jacobian: state at a primary's center");
    const double r1m3 = std::pow(r1sq, -1.5);
    const double r2m3 = std::pow(r2sq, -1.5);
    const double r1m5 = r1m3 / r1sq;
    const double r2m5 = r2m3 / r2sq;

    const double m1 = 1.0 - mu;
    // Second partials of the effective potential.
    const double uxx = 1.0 - m1 * r1m3 - mu * r2m3 + 3.0 * (m1 * xe * xe * r1m5 + mu * xm * xm * r2m5);
    const double uyy = 1.0 - m1 * r1m3 - mu * r2m3 + 3.0 * (m1 * y * y * r1m5 + mu * y * y * r2m5);
    const double uzz = -m1 * r1m3 - mu * r2m3 + 3.0 * (m1 * z * z * r1m5 + mu * z * z * r2m5);
    const double uxy = 3.0 * (m1 * xe * y * r1m5 + mu * xm * y * r2m5);
    const double uxz = 3.0 * (m1 * xe * z * r1m5 + mu * xm * z * r2m5);
    const double uyz = 3.0 * (m1 * y * z * r1m5 + mu * y * z * r2m5);

    Mat6 a = Mat6::Zero();
    a(0, 3) = a(1, 4) = a(2, 5) = 1.0;
    a(3, 0) = uxx; a(3, 1) = uxy; a(3, 2) = uxz;
    a(4, 0) = uxy; a(4, 1) = uyy; a(4, 2) = uyz;
    a(5, 0) = uxz; a(5, 1) = uyz; a(5, 2) = uzz;
    a(3, 4) = 2.0;
    a(4, 3) = -2.0;
    return a;
}

AugmentedState variational_rhs(const AugmentedState& a, const SystemParams& p) {
    return {cr3bp_rhs(a.state, p), cr3bp_jacobian(a.state, p) * a.stm};
}

AugmentedState propagate_with_stm(const State& s0, double t_span, int nsteps, const SystemParams& p) {
    AugmentedState a{s0, Mat6::Identity()};
    return rk4_propagate([&p](const AugmentedState& s) { return variational_rhs(s, p); }, a, t_span, nsteps);
}

PlaneCrossing propagate_to_plane_crossing(const State& s0, const SystemParams& p, double h, double t_max) {
    const auto f = [&p](const State& s) { return cr3bp_rhs(s, p); };
    State s = s0;
    double t = 0.0;
    bool armed = false; // start may sit on the plane; arm once |y| grows
    double prev_y = s.y();
    while (t < t_max) {
        const State next = rk4_step(f, s, h);
        const double y = next.y();
        if (!armed && std::abs(y) > 1e-8) {
            armed = true;
            prev_y = y;
            s = next;
            t += h;
            continue;
        }
        if (armed && y * prev_y < 0.0) {
            // Newton on the substep length from s, using ydot at the crossing.
            double tau = h * prev_y / (prev_y - y);
            State c = next;
            for (int it = 0; it < 40; ++it) {
                c = rk4_step(f, s, tau);
                const double cy = c.y();
                if (std::abs(cy) < 1e-12) break;
                tau -= cy / c.vy(); // dy/dt is the state's own ydot
            }
            if (std::abs(c.y()) > 1e-12) {
                throw ConvergenceError("propagate_to_plane_crossing: crossing refinement stalled");
            }
            return {c, t + tau};
        }
        prev_y = y;
        s = next;
        t += h;
    }
    throw ConvergenceError("propagate_to_plane_crossing: no crossing before t_max");
}

} // namespace lunamap
