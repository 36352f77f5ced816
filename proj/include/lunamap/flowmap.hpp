#pragma once

#include <array>
#include <string>
#include <vector>

#include "lunamap/family.hpp"
#include "lunamap/regress.hpp"
#include "lunamap/tps.hpp"

namespace lunamap {

enum class GridMode { AbsoluteTime, NormalizedTime };

// Propagated family state as a series in the parameter deviation, sampled on
// a grid of instants. In absolute mode the grid holds times shared by every
// member; in normalized mode it holds fractions of each member's own period
// and the integration step is itself a series (period / ns).
struct FlowMap {
    GridMode mode = GridMode::AbsoluteTime;
    FamilyId family = FamilyId::L1Lyapunov;
    double mu = 0.0;
    double kappa_hat = 0.0;
    int order = 0;
    int ns = 0;                // steps per period
    double trust_radius = 0.0; // |dkappa| the map is considered valid for
    std::vector<double> grid;
    std::vector<std::array<Tps, 6>> frames;
    Tps period_map; // normalized mode only

    State frame_state(std::size_t index, double dkappa) const;
};

// Series propagation through an increasing time grid starting at 0. Each grid
// interval is subdivided so the real step stays at or below the shortest
// in-trust period divided by ns.
FlowMap build_time_map(const SeriesState& init, const std::vector<double>& t_grid, int ns,
                       double trust_radius, FamilyId family, const SystemParams& p);

// Series propagation with the series-valued step period/ns; snapshots at
// every step give the uniform normalized grid 0, 1/ns, ..., 1.
FlowMap build_normalized_map(const SeriesState& init, int ns, double trust_radius,
                             FamilyId family, const SystemParams& p);

struct MapQuery {
    State state{};
    bool within_trust = true;
};

// Evaluate the two bracketing grid frames at dkappa and interpolate with a
// cubic Hermite using flow derivatives at both ends. Instants exactly on the
// grid evaluate directly.
MapQuery query_state(const FlowMap& map, double dkappa, double instant, const SystemParams& p);

// eta = t / period(dkappa); normalized-mode maps only.
double time_to_eta(const FlowMap& map, double dkappa, double t);

struct NearestResult {
    double kappa = 0.0;
    double dkappa = 0.0;
    double eta = 0.0;
    double distance = 0.0;
};

// Closest on-family point to a position: coarse scan over the (dkappa, eta)
// grid followed by Nelder-Mead refinement of the squared distance. A hint
// skips the coarse scan and refines locally (used by the controller loop).
NearestResult nearest_member(const FlowMap& map, const std::array<double, 3>& position,
                             const SystemParams& p, const NearestResult* hint = nullptr,
                             int kappa_samples = 50);

std::string to_json_string(const FlowMap& map);
FlowMap flow_map_from_json_string(const std::string& text);

} // namespace lunamap
