#include "lunamap/pipeline.hpp"

#include <cmath>

#include "lunamap/rk4.hpp"

namespace lunamap {

double next_uniform(std::uint64_t& state) {
    // splitmix64 step; uniform double from the top 53 bits.
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

FamilyTable build_family(FamilyId id, const PipelineOptions& opts) {
    const SystemParams p = opts.params();
    validate(p);

    if (!is_halo(id)) {
        const CorrectorOptions co = opts.corrector_for(id);
        const OrbitMember seed = correct_half_period(
            lyapunov_linear_seed(libration_of(id), 0.01, p), id, p, co);
        SweepOptions sweep;
        sweep.count = opts.lyapunov_count;
        return generate_family(seed, opts.ds_lyapunov, sweep, p, co);
    }

    // Halo path: planar scan to the bifurcation, branch, then sweep with the
    // finer internal step until the fold is passed or perilune gets too low.
    const FamilyId planar_id =
        id == FamilyId::L1Halo ? FamilyId::L1Lyapunov : FamilyId::L2Lyapunov;
    const CorrectorOptions planar_co = opts.corrector_for(planar_id);
    const OrbitMember planar_seed = correct_half_period(
        lyapunov_linear_seed(libration_of(id), 0.01, p), planar_id, p, planar_co);
    SweepOptions scan;
    scan.count = opts.planar_scan_count;
    const FamilyTable planar = generate_family(planar_seed, opts.planar_scan_ds, scan, p, planar_co);

    const CorrectorOptions halo_co = opts.corrector_for(id);
    const OrbitMember halo_seed = seed_halo_family(planar, p, halo_co);
    SweepOptions sweep;
    sweep.count = opts.halo_count;
    sweep.stop_after_fold = opts.halo_stop_after_fold;
    sweep.min_moon_distance = opts.halo_moon_floor;
    return generate_family(halo_seed, opts.ds_halo, sweep, p, halo_co);
}

GlobalModel fit_family(const FamilyTable& table, const PipelineOptions& opts) {
    const auto [lo, hi] = table.longest_monotone_range();
    if (lo == 0 && hi + 1 == table.members.size()) {
        return fit_global(table, opts.regions, opts.degree);
    }
    FamilyTable segment = table;
    segment.members.assign(table.members.begin() + lo, table.members.begin() + hi + 1);
    segment.tangents.clear();
    segment.step_used.clear();
    segment.folds.clear();
    return fit_global(segment, opts.regions, opts.degree);
}

double default_trust(const GlobalModel& model) {
    return 0.5 * (model.kappa_max - model.kappa_min) / model.regions.size();
}

FlowMap build_map(const GlobalModel& model, double op_point, GridMode mode,
                  const PipelineOptions& opts) {
    const SystemParams p{model.mu};
    const SeriesState init = to_series(model, op_point, opts.order);
    const double trust = default_trust(model);
    if (mode == GridMode::NormalizedTime) {
        return build_normalized_map(init, opts.ns, trust, model.family, p);
    }
    const double t_hat = init.period.evaluate({0.0});
    std::vector<double> grid(opts.ns + 1);
    for (int j = 0; j <= opts.ns; ++j) grid[j] = t_hat * j / opts.ns;
    return build_time_map(init, grid, opts.ns, trust, model.family, p);
}

OrbitMember member_at_kappa(const GlobalModel& model, double kappa, const PipelineOptions& opts) {
    if (is_halo(model.family)) {
        throw std::invalid_argument("member_at_kappa: exact-parameter correction is planar only");
    }
    const SystemParams p{model.mu};
    const ModelState guess = evaluate_model(model, kappa);
    return correct_half_period(guess.x0, model.family, p, opts.corrector_for(model.family),
                               0.5 * guess.period);
}

ControlScenario scenario_from_table(FamilyTable table, const PdConfig& cfg,
                                    const PipelineOptions& opts) {
    ControlScenario sc;
    sc.table = std::move(table);
    PipelineOptions wide = opts;
    wide.regions = opts.control_regions;
    sc.model = fit_family(sc.table, wide);
    sc.op_point = 0.5 * (sc.model.kappa_min + sc.model.kappa_max);
    sc.map = build_map(sc.model, sc.op_point, GridMode::NormalizedTime, wide);
    redraw_start(sc, cfg, opts);
    return sc;
}

ControlScenario build_control_scenario(FamilyId id, const PdConfig& cfg,
                                       const PipelineOptions& opts) {
    return scenario_from_table(build_family(id, opts), cfg, opts);
}

void redraw_start(ControlScenario& sc, const PdConfig& cfg, const PipelineOptions& opts) {
    const SystemParams p = opts.params();
    std::uint64_t rng = cfg.seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL;

    sc.start_kappa = sc.op_point + (2.0 * next_uniform(rng) - 1.0) * opts.control_draw_radius;
    sc.start_eta = next_uniform(rng);
    sc.start = query_state(sc.map, sc.start_kappa - sc.op_point, sc.start_eta, p).state;

    // Random direction on the sphere scaled to the disturbance magnitude.
    const double cos_th = 2.0 * next_uniform(rng) - 1.0;
    const double sin_th = std::sqrt(std::max(0.0, 1.0 - cos_th * cos_th));
    const double phi = 2.0 * std::acos(-1.0) * next_uniform(rng);
    sc.start[3] += cfg.disturbance * sin_th * std::cos(phi);
    sc.start[4] += cfg.disturbance * sin_th * std::sin(phi);
    sc.start[5] += cfg.disturbance * cos_th;
}

std::vector<HoldOrbitsRow> run_hold_orbits(const GlobalModel& model, int samples, int revs,
                                           std::uint64_t seed, const PipelineOptions& opts) {
    const SystemParams p{model.mu};
    const auto f = [&p](const State& s) { return cr3bp_rhs(s, p); };
    std::uint64_t rng = seed * 0x9e3779b97f4a7c15ULL + 0x452821e638d01377ULL;

    std::vector<HoldOrbitsRow> rows;
    rows.reserve(samples);
    for (int n = 0; n < samples; ++n) {
        HoldOrbitsRow row;
        row.kappa = model.kappa_min + next_uniform(rng) * (model.kappa_max - model.kappa_min);
        const ModelState ms = evaluate_model(model, row.kappa);
        State s = ms.x0;
        for (int rev = 1; rev <= revs; ++rev) {
            s = rk4_propagate(f, s, ms.period, opts.ns);
            double pos = 0.0, vel = 0.0;
            for (int c = 0; c < 3; ++c) {
                pos = std::max(pos, std::abs(s[c] - ms.x0[c]));
                vel = std::max(vel, std::abs(s[c + 3] - ms.x0[c + 3]));
            }
            row.pos_err.push_back(pos);
            row.vel_err.push_back(vel);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<GlobalLocalRow> run_global_local(const FamilyTable& table, const GlobalModel& model,
                                             std::size_t designed_index, int window, int degree,
                                             int samples, const PipelineOptions& opts) {
    const SystemParams p{model.mu};
    const auto f = [&p](const State& s) { return cr3bp_rhs(s, p); };
    const LocalModel local = fit_local(table, designed_index, window, degree);

    auto one_period_error = [&](const ModelState& ms) {
        // Wild extrapolations can throw the state into a primary or NaN out;
        // both count as a failed prediction.
        if (!(ms.period > 0.0) || !std::isfinite(ms.period)) return 1e300;
        State ret;
        try {
            ret = rk4_propagate(f, ms.x0, ms.period, opts.ns);
        } catch (const DomainError&) {
            return 1e300;
        }
        double err = 0.0;
        for (int c = 0; c < 3; ++c) {
            const double d = std::abs(ret[c] - ms.x0[c]);
            err = std::isfinite(d) ? std::max(err, d) : 1e300;
        }
        return err;
    };

    std::vector<GlobalLocalRow> rows;
    rows.reserve(samples);
    for (int n = 0; n < samples; ++n) {
        GlobalLocalRow row;
        row.kappa =
            model.kappa_min + (model.kappa_max - model.kappa_min) * (n + 0.5) / samples;
        row.err_global = one_period_error(evaluate_model(model, row.kappa));
        row.err_local = one_period_error(evaluate_model(local, row.kappa));
        rows.push_back(row);
    }
    return rows;
}

Comparison run_comparison(const ControlScenario& sc, const PdConfig& cfg,
                          const PipelineOptions& opts) {
    const SystemParams p = opts.params();
    Comparison out;
    out.proposed = simulate_pd(sc.map, sc.start, cfg, p);

    // The proposed law settles on whichever member it ends nearest to; that
    // orbit becomes the tracking target.
    const auto& last = out.proposed.trajectory.back();
    const State final_state{{last[1], last[2], last[3], last[4], last[5], last[6]}};
    const NearestResult fin =
        nearest_member(sc.map, {final_state.x(), final_state.y(), final_state.z()}, p);
    out.target = member_at_kappa(sc.model, fin.kappa, opts);

    out.tracking = simulate_tracking(out.target, sc.start, cfg, p);
    if (out.tracking.total_dv > 0.0) {
        out.reduction_percent =
            100.0 * (out.tracking.total_dv - out.proposed.total_dv) / out.tracking.total_dv;
    }
    return out;
}

} // namespace lunamap
