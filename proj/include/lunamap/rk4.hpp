#pragma once

#include "lunamap/state.hpp"
#include "lunamap/tps.hpp"

namespace lunamap {

namespace detail {
inline double step_magnitude(double h) { return h; }
inline double step_magnitude(const Tps& h) { return h.constant_part(); }
} // namespace detail

// One classical fourth-order Runge-Kutta step of an autonomous field. The
// step size may itself be a ring element (series-valued sampling time), in
// which case every stage scaling is a series product.
template <class StateLike, class Step, class F>
StateLike rk4_step(const F& f, const StateLike& s, const Step& h) {
    const auto k1 = f(s);
    const auto k2 = f(s + (h * 0.5) * k1);
    const auto k3 = f(s + (h * 0.5) * k2);
    const auto k4 = f(s + h * k3);
    return s + (h * (1.0 / 6.0)) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Fixed-step propagation over t_span with uniform step h = t_span / nsteps.
// Deterministic; negative t_span integrates backwards.
template <class StateLike, class Step, class F>
StateLike rk4_propagate(const F& f, StateLike s, const Step& t_span, int nsteps) {
    if (nsteps < 1) throw std::invalid_argument("rk4_propagate: nsteps must be >= 1");
    if (detail::step_magnitude(t_span) == 0.0) return s;
    const Step h = t_span * (1.0 / nsteps);
    for (int i = 0; i < nsteps; ++i) s = rk4_step(f, s, h);
    return s;
}

} // namespace lunamap
