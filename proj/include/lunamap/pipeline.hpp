#pragma once

#include <cstdint>

#include "lunamap/control.hpp"
#include "lunamap/flowmap.hpp"
#include "lunamap/regress.hpp"

namespace lunamap {

// End-to-end build parameters. Halo sweeps run at a finer internal step so
// perilune passes stay resolved; they stop shortly past a fold or at the
// Moon-distance floor.
struct PipelineOptions {
    double mu = 0.01215;
    double ds_lyapunov = 1e-3;
    double ds_halo = 5e-3;
    int lyapunov_count = 500;
    int halo_count = 400;
    int steps_half_lyapunov = 500;
    int steps_half_halo = 2000;
    int halo_stop_after_fold = 10;
    double halo_moon_floor = 0.028;
    int planar_scan_count = 400;
    double planar_scan_ds = 5e-3;
    int regions = 8;
    int degree = 30;
    int order = 5;
    int ns = 1000;
    // The station-keeping map wants a wide single expansion so the disturbed
    // trajectory stays identifiable; fewer regions widen the trust window.
    int control_regions = 2;
    // Start orbits are drawn within this parameter distance of the map's
    // operating point: the full-revolution series is only convergent there.
    double control_draw_radius = 1e-3;

    SystemParams params() const { return {mu}; }
    CorrectorOptions corrector_for(FamilyId id) const {
        CorrectorOptions c;
        c.steps_half_period = is_halo(id) ? steps_half_halo : steps_half_lyapunov;
        return c;
    }
};

// Seed and sweep one family. Planar families start from the linearized seed;
// halo families run a planar scan first and branch at the bifurcation.
FamilyTable build_family(FamilyId id, const PipelineOptions& opts);

// Global fit over the longest monotone parameter range of the table.
GlobalModel fit_family(const FamilyTable& table, const PipelineOptions& opts);

// Half the region width: the deviation range a single-region expansion is
// trusted for.
double default_trust(const GlobalModel& model);

FlowMap build_map(const GlobalModel& model, double op_point, GridMode mode,
                  const PipelineOptions& opts);

// Corrected member at an exact parameter value (planar families), seeded from
// the fitted model.
OrbitMember member_at_kappa(const GlobalModel& model, double kappa, const PipelineOptions& opts);

// Station-keeping scenario: a start state drawn on a random member at a
// random phase with a randomly oriented velocity disturbance.
struct ControlScenario {
    FamilyTable table;
    GlobalModel model;
    FlowMap map;
    double op_point = 0.0;
    State start{};
    double start_kappa = 0.0;
    double start_eta = 0.0;
};

ControlScenario build_control_scenario(FamilyId id, const PdConfig& cfg,
                                       const PipelineOptions& opts);

// Same scenario construction on an already-swept table.
ControlScenario scenario_from_table(FamilyTable table, const PdConfig& cfg,
                                    const PipelineOptions& opts);

// Same scenario with a fresh seed: only the start state is redrawn.
void redraw_start(ControlScenario& scenario, const PdConfig& cfg, const PipelineOptions& opts);

struct Comparison {
    ControlRun proposed;
    ControlRun tracking;
    OrbitMember target;
    double reduction_percent = 0.0;
};

// Comparison protocol: run the map-steered law, adopt its converged orbit as
// the tracking target, and run the tracker from the identical start.
Comparison run_comparison(const ControlScenario& scenario, const PdConfig& cfg,
                          const PipelineOptions& opts);

// Deterministic uniform double in [0, 1) from a 64-bit generator.
double next_uniform(std::uint64_t& state);

// Accuracy experiment: model-generated states propagated whole revolutions;
// the return error per revolution measures how long the model holds an orbit.
struct HoldOrbitsRow {
    double kappa = 0.0;
    std::vector<double> pos_err; // one entry per completed revolution
    std::vector<double> vel_err;
};

std::vector<HoldOrbitsRow> run_hold_orbits(const GlobalModel& model, int samples, int revs,
                                           std::uint64_t seed, const PipelineOptions& opts);

// One-period return error of the global model against a local expansion
// around a designed member, sampled across the family domain.
struct GlobalLocalRow {
    double kappa = 0.0;
    double err_global = 0.0;
    double err_local = 0.0;
};

std::vector<GlobalLocalRow> run_global_local(const FamilyTable& table, const GlobalModel& model,
                                             std::size_t designed_index, int window, int degree,
                                             int samples, const PipelineOptions& opts);

} // namespace lunamap
