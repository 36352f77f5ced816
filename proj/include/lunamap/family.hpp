#pragma once

#include <string>
#include <vector>

#include "lunamap/cr3bp.hpp"
#include "lunamap/state.hpp"
#include "lunamap/variational.hpp"

namespace lunamap {

enum class FamilyId { L1Lyapunov, L2Lyapunov, L1Halo, L2Halo };

std::string family_name(FamilyId id);             // "L1-Lyap", "L2-Halo", ...
FamilyId family_from_name(const std::string& s);
bool is_halo(FamilyId id);
Libration libration_of(FamilyId id);
FamilyId halo_counterpart(FamilyId planar);

// Planar corrector free-variable choice. The default keeps x0 fixed so the
// family parameter is exact for the regression stage.
enum class PlanarFree { YdotAndPeriod, XAndPeriod };

struct CorrectorOptions {
    double tol = 1e-12;        // Newton target
    double accept_tol = 1e-10; // residual level that still counts as converged
    int max_iter = 25;
    int steps_half_period = 500; // RK4 steps over the half period
    PlanarFree planar_free = PlanarFree::YdotAndPeriod;
};

// A corrected periodic orbit: initial state on the y = 0 plane, full period,
// and the family parameter kappa = x0.
struct OrbitMember {
    State x0{};
    double period = 0.0;
    double kappa = 0.0;
    FamilyId family = FamilyId::L1Lyapunov;
    double res_y = 0.0;  // |y| at the half period
    double res_vx = 0.0; // |xdot| at the half period
    double res_vz = 0.0; // |zdot| at the half period
    int iterations = 0;
};

// Unit tangent to the family manifold in free-variable space
// (x0, z0, ydot0, T/2); the z0 component is exactly zero for planar families.
struct TangentVector {
    double x0 = 0.0;
    double z0 = 0.0;
    double ydot0 = 0.0;
    double t_half = 0.0;

    double dot(const TangentVector& o) const {
        return x0 * o.x0 + z0 * o.z0 + ydot0 * o.ydot0 + t_half * o.t_half;
    }
    double norm() const { return std::sqrt(dot(*this)); }
};

struct FamilyTable {
    FamilyId family = FamilyId::L1Lyapunov;
    double mu = 0.0;
    double step = 0.0; // requested arclength step
    std::vector<OrbitMember> members;
    std::vector<TangentVector> tangents; // tangent used to reach member i+1, per member
    std::vector<double> step_used;       // actual ds for member i -> i+1
    std::vector<std::size_t> folds;      // indices where the kappa direction reverses
    std::string stop_reason;             // empty when the full count was generated

    // Longest contiguous index range with strictly monotone kappa.
    std::pair<std::size_t, std::size_t> longest_monotone_range() const;
};

// Newton refinement of a symmetric periodic orbit. The guess sits on the
// y = 0 plane with xdot = zdot = 0; t_half_guess <= 0 triggers plane-crossing
// detection for the initial half period.
OrbitMember correct_half_period(const State& guess, FamilyId family, const SystemParams& p,
                                const CorrectorOptions& opts = {}, double t_half_guess = 0.0);

// Unit null vector of the constraint Jacobian, oriented along the previous
// tangent when given, otherwise by `direction` applied to the natural
// parameter (x0 for planar families, z0 for halo families).
TangentVector family_tangent(const OrbitMember& m, const SystemParams& p,
                             const CorrectorOptions& opts = {},
                             const TangentVector* previous = nullptr, int direction = +1);

struct PacResult {
    OrbitMember member;
    double ds_used = 0.0;
    int newton_iterations = 0;
};

// One pseudo-arclength step: predictor m + ds * tangent, then Newton on the
// constraints augmented with the arclength condition. Halves ds up to four
// times if Newton fails to converge.
PacResult pac_step(const OrbitMember& m, const TangentVector& tangent, double ds,
                   const SystemParams& p, const CorrectorOptions& opts = {});

struct SweepOptions {
    int count = 100;
    int direction = +1;
    int stop_after_fold = -1;       // >= 0: stop that many members after the first fold
    double min_moon_distance = 0.0; // > 0: stop once an orbit dips below this radius
};

FamilyTable generate_family(const OrbitMember& seed, double ds, const SweepOptions& sweep,
                            const SystemParams& p, const CorrectorOptions& opts = {});

// Full-period state transition matrix.
Mat6 monodromy(const OrbitMember& m, const SystemParams& p, const CorrectorOptions& opts = {});

// Locates the planar member whose out-of-plane multipliers cross +1, nudges
// z0 off the plane and corrects in three dimensions. The result is the first
// member of the spatial family; flip its z0 for the southern branch. When
// given, bifurcation_out receives the refined planar member at the crossing.
OrbitMember seed_halo_family(const FamilyTable& planar, const SystemParams& p,
                             const CorrectorOptions& opts = {},
                             OrbitMember* bifurcation_out = nullptr);

struct ValidationReport {
    bool all_ok = false;
    std::size_t checked = 0;
    double max_return_pos_err = 0.0;
    double max_return_vel_err = 0.0;
    double max_residual = 0.0;
    double max_spacing_err = 0.0;
    double max_symmetry_err = 0.0;
    int jacobi_monotonicity_flags = 0; // informational, not a failure
    std::vector<double> min_moon_distance;
    std::string failure;
};

ValidationReport validate_table(const FamilyTable& table, const SystemParams& p,
                                const CorrectorOptions& opts = {});

} // namespace lunamap
