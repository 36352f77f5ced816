#include "lunamap/control.hpp"

#include <cmath>
#include <functional>

#include "lunamap/rk4.hpp"

namespace lunamap {

void validate(const PdConfig& cfg) {
    if (!(cfg.kp > 0.0) || !(cfg.kd > 0.0)) throw std::invalid_argument("PdConfig: gains must be positive");
    if (!(cfg.eta_t > 0.0 && cfg.eta_t < 1.0)) throw std::invalid_argument("PdConfig: eta_t must lie in (0, 1)");
    if (cfg.revs < 1) throw std::invalid_argument("PdConfig: revs must be >= 1");
    if (cfg.disturbance < 0.0) throw std::invalid_argument("PdConfig: disturbance must be >= 0");
}

State pd_reference(const FlowMap& map, double kappa0, double eta0, double eta_t,
                   const SystemParams& p) {
    double eta = eta0 + eta_t;
    eta -= std::floor(eta);
    return query_state(map, kappa0 - map.kappa_hat, eta, p).state;
}

std::array<double, 3> pd_impulse(const State& x, const State& x_r, const PdConfig& cfg, double t_t) {
    if (!(t_t > 0.0)) throw std::invalid_argument("pd_impulse: transfer time must be positive");
    std::array<double, 3> dv{};
    for (int i = 0; i < 3; ++i) {
        const double u = -(cfg.kp * (x[i] - x_r[i]) + cfg.kd * (x[i + 3] - x_r[i + 3]));
        dv[i] = u * t_t;
    }
    return dv;
}

namespace {

// One reference request: where to aim, how long the transfer runs, and the
// identified anchoring on the family (for the log and escape check).
struct ReferencePoint {
    State x_r{};
    double t_t = 0.0;
    double kappa0 = 0.0;
    double eta0 = 0.0;
    double anchor_distance = 0.0;
    bool out_of_range = false; // provider-specific escape condition
};

ControlRun impulse_loop(const State& start, double t_ref, const PdConfig& cfg,
                        const SystemParams& p, int steps_per_transfer,
                        const std::function<ReferencePoint(const State&)>& next_reference) {
    ControlRun run;
    const auto f = [&p](const State& s) { return cr3bp_rhs(s, p); };

    State x = start;
    double t = 0.0;
    const double t_end = cfg.revs * t_ref;
    int below = 0;

    run.trajectory.push_back({t, x[0], x[1], x[2], x[3], x[4], x[5]});
    while (t < t_end - 1e-12) {
        const ReferencePoint ref = next_reference(x);
        if (ref.out_of_range) {
            run.escaped = true;
            run.escape_time = t;
            break;
        }

        // The burn cancels the predicted ballistic arrival error: a state
        // already riding the reference trajectory commands nothing.
        const State arrival = rk4_propagate(f, x, ref.t_t, steps_per_transfer);
        const std::array<double, 3> dv = pd_impulse(arrival, ref.x_r, cfg, ref.t_t);
        const double dv_norm = std::sqrt(dv[0] * dv[0] + dv[1] * dv[1] + dv[2] * dv[2]);
        for (int i = 0; i < 3; ++i) x[i + 3] += dv[i];
        run.impulses.push_back({t, dv, dv_norm, ref.kappa0, ref.eta0});
        run.total_dv += dv_norm;
        run.trajectory.push_back({t, x[0], x[1], x[2], x[3], x[4], x[5]});

        // Convergence latches at the first streak of sub-threshold impulses.
        if (dv_norm < cfg.dv_threshold) {
            if (++below == cfg.consecutive && !run.converged) {
                run.converged = true;
                run.convergence_revolution = static_cast<int>(std::floor(t / t_ref)) + 1;
            }
        } else {
            below = 0;
        }

        const double h = ref.t_t / steps_per_transfer;
        for (int k = 0; k < steps_per_transfer; ++k) {
            x = rk4_step(f, x, h);
            t += h;
            run.trajectory.push_back({t, x[0], x[1], x[2], x[3], x[4], x[5]});
        }
    }
    return run;
}

} // namespace

ControlRun simulate_pd(const FlowMap& map, const State& start, const PdConfig& cfg,
                       const SystemParams& p) {
    validate(cfg);
    if (map.mode != GridMode::NormalizedTime) {
        throw std::invalid_argument("simulate_pd: needs a normalized-time map");
    }

    NearestResult anchor = nearest_member(map, {start.x(), start.y(), start.z()}, p);
    const double t_ref = map.period_map.evaluate({anchor.dkappa});
    const int steps = std::max(1, static_cast<int>(std::lround(cfg.eta_t * map.ns)));
    bool first = true;

    auto next_reference = [&, anchor, first](const State& x) mutable {
        if (first) {
            first = false; // keep the pre-computed anchor for the first burn
        } else {
            NearestResult hint = anchor;
            hint.eta += cfg.eta_t; // the satellite advanced one transfer
            hint.eta -= std::floor(hint.eta);
            anchor = nearest_member(map, {x.x(), x.y(), x.z()}, p, &hint);
        }
        ReferencePoint ref;
        ref.kappa0 = anchor.kappa;
        ref.eta0 = anchor.eta;
        ref.anchor_distance = anchor.distance;
        ref.out_of_range = anchor.distance > cfg.escape_distance ||
                           std::abs(anchor.dkappa) >= 0.999 * map.trust_radius;
        ref.x_r = pd_reference(map, anchor.kappa, anchor.eta, cfg.eta_t, p);
        ref.t_t = cfg.eta_t * map.period_map.evaluate({anchor.dkappa});
        return ref;
    };
    return impulse_loop(start, t_ref, cfg, p, steps, next_reference);
}

ControlRun simulate_tracking(const OrbitMember& target, const State& start, const PdConfig& cfg,
                             const SystemParams& p) {
    validate(cfg);
    const auto f = [&p](const State& s) { return cr3bp_rhs(s, p); };

    // The reference rides the target's own clock from its epoch state: a
    // phase-shifted satellite is hauled back to the planned phase.
    State ref_state = target.x0;
    double ref_phase = 0.0;
    const double t_t = cfg.eta_t * target.period;
    const int steps = std::max(1, static_cast<int>(std::lround(cfg.eta_t * 1000)));

    // Large commanded separations are part of the job; escape means the gap
    // grows well past the initial one.
    const double initial_gap = std::hypot(start.x() - ref_state.x(), start.y() - ref_state.y(),
                                          start.z() - ref_state.z());
    const double escape_gap = std::max(cfg.escape_distance, 2.5 * initial_gap);

    auto next_reference = [&, ref_state, ref_phase](const State& x) mutable {
        const State ahead = rk4_propagate(f, ref_state, t_t, steps);
        ReferencePoint ref;
        ref.x_r = ahead;
        ref.t_t = t_t;
        ref.kappa0 = target.kappa;
        ref.eta0 = ref_phase;
        const double gap = std::hypot(x.x() - ref_state.x(), x.y() - ref_state.y(),
                                      x.z() - ref_state.z());
        ref.anchor_distance = gap;
        ref.out_of_range = gap > escape_gap;
        ref_state = ahead;
        ref_phase += cfg.eta_t;
        ref_phase -= std::floor(ref_phase);
        return ref;
    };
    return impulse_loop(start, target.period, cfg, p, steps, next_reference);
}

} // namespace lunamap
