#pragma once

#include <Eigen/Dense>

#include "lunamap/cr3bp.hpp"
#include "lunamap/state.hpp"

namespace lunamap {

using Mat6 = Eigen::Matrix<double, 6, 6>;

// State bundled with its transition matrix, integrated jointly so the
// sensitivity information is evaluated along the exact same discrete flow.
struct AugmentedState {
    State state{};
    Mat6 stm = Mat6::Identity();
};

inline AugmentedState operator+(const AugmentedState& a, const AugmentedState& b) {
    return {a.state + b.state, a.stm + b.stm};
}

inline AugmentedState operator*(double c, const AugmentedState& a) {
    return {c * a.state, c * a.stm};
}

// Jacobian A of the vector field at a state.
Mat6 cr3bp_jacobian(const State& s, const SystemParams& p);

// d/dt of the augmented state: (f(s), A(s) * stm).
AugmentedState variational_rhs(const AugmentedState& a, const SystemParams& p);

// Propagate state + STM for t_span with nsteps RK4 steps.
AugmentedState propagate_with_stm(const State& s0, double t_span, int nsteps, const SystemParams& p);

// Forward propagation until the trajectory next crosses the y = 0 plane,
// stepping with h and refining the crossing time by Newton iteration on y
// until |y| < 1e-12. t_max bounds the search.
struct PlaneCrossing {
    State state{};
    double time = 0.0;
};

PlaneCrossing propagate_to_plane_crossing(const State& s0, const SystemParams& p, double h, double t_max);

} // namespace lunamap
