#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lunamap/flowmap.hpp"

namespace lunamap {

// Impulse-law configuration. Gains act element-wise: the commanded thrust is
// -(kp * position error + kd * velocity error), applied as a velocity change
// over the transfer time.
struct PdConfig {
    double kp = 4.0;
    double kd = 4.0;
    double eta_t = 0.05; // normalized transfer time
    int revs = 10;       // simulated revolutions
    std::uint64_t seed = 1;
    double disturbance = 1e-3; // initial velocity perturbation magnitude
    double dv_threshold = 1e-6;
    int consecutive = 5;           // sub-threshold impulses declaring convergence
    double escape_distance = 0.05; // off-family distance marking a failed run
};

void validate(const PdConfig& cfg);

struct Impulse {
    double t = 0.0;
    std::array<double, 3> dv{};
    double dv_norm = 0.0;
    double kappa0 = 0.0;
    double eta0 = 0.0;
};

struct ControlRun {
    std::vector<std::array<double, 7>> trajectory; // t, x, y, z, xdot, ydot, zdot
    std::vector<Impulse> impulses;
    double total_dv = 0.0;
    bool converged = false;
    int convergence_revolution = -1; // 1-based revolution in which convergence completed
    bool escaped = false;
    double escape_time = 0.0;
};

// Reference state one normalized transfer ahead of (kappa0, eta0) on the
// family map; eta wraps modulo one period.
State pd_reference(const FlowMap& map, double kappa0, double eta0, double eta_t,
                   const SystemParams& p);

// dv = -(kp * e_pos + kd * e_vel) * t_t.
std::array<double, 3> pd_impulse(const State& x, const State& x_r, const PdConfig& cfg, double t_t);

// Impulse loop steered by the family map: identify the nearest member, aim at
// its state one transfer ahead, burn, coast ballistically, repeat.
ControlRun simulate_pd(const FlowMap& map, const State& start, const PdConfig& cfg,
                       const SystemParams& p);

// Same law and cadence, but the reference rides a fixed target orbit's own
// timeline instead of re-identifying the nearest family member.
ControlRun simulate_tracking(const OrbitMember& target, const State& start, const PdConfig& cfg,
                             const SystemParams& p);

} // namespace lunamap
