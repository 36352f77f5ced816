#pragma once

#include <array>
#include <string>
#include <vector>

#include "lunamap/family.hpp"
#include "lunamap/tps.hpp"

namespace lunamap {

// One region of the piecewise family model. Fits live on the scaled variable
// s = (kappa - op_point) / scale, kept within [-1, 1]; coefficients are in
// the Chebyshev basis on that variable (monomial coefficients of this degree
// would drown in roundoff).
struct RegionFit {
    double lower = 0.0;
    double upper = 0.0;
    double op_point = 0.0;
    double scale = 1.0;
    std::vector<double> coeff_z0;     // empty for planar families
    std::vector<double> coeff_ydot0;
    std::vector<double> coeff_period;
    double rms_z0 = 0.0;
    double rms_ydot0 = 0.0;
    double rms_period = 0.0;
    double condition = 0.0; // condition estimate of the design matrix
};

// Family-wide model: regions tile [kappa_min, kappa_max] half-open, the last
// interval closed, with exactly one region active per query.
struct GlobalModel {
    FamilyId family = FamilyId::L1Lyapunov;
    double mu = 0.0;
    int degree = 0;
    double kappa_min = 0.0;
    double kappa_max = 0.0;
    std::vector<RegionFit> regions;

    bool in_domain(double kappa) const { return kappa >= kappa_min && kappa <= kappa_max; }
    std::size_t region_index(double kappa) const;
};

// Single expansion around a designed member, fitted only on its neighbours.
struct LocalModel {
    FamilyId family = FamilyId::L1Lyapunov;
    double mu = 0.0;
    int degree = 0;
    int window = 0;
    double op_point = 0.0;
    double scale = 1.0;
    double window_lo = 0.0;
    double window_hi = 0.0;
    std::vector<double> coeff_z0;
    std::vector<double> coeff_ydot0;
    std::vector<double> coeff_period;
};

struct ModelState {
    State x0{};
    double period = 0.0;
};

struct FitOptions {
    // A fit whose relative residual exceeds this is refused outright.
    double max_relative_rms = 1e-6;
};

// Least-squares fit per equal-width region on the scaled variable. Throws
// FitError when a region is underdetermined or the residual is out of bounds.
GlobalModel fit_global(const FamilyTable& table, int region_count, int degree,
                       const FitOptions& opts = {});

// Polynomial about the member at member_index fitted on `window` neighbours
// (the member included), bracketing the operating point.
LocalModel fit_local(const FamilyTable& table, std::size_t member_index, int window, int degree);

ModelState evaluate_model(const GlobalModel& model, double kappa);
ModelState evaluate_model(const LocalModel& model, double kappa);

// Initial-state series in the family-parameter deviation about op_point,
// truncated at the requested order, with the matching period series.
struct SeriesState {
    std::array<Tps, 6> state;
    Tps period;
    double op_point = 0.0;
};

SeriesState to_series(const GlobalModel& model, double op_point, int order);
SeriesState to_series(const LocalModel& model, double op_point, int order);

} // namespace lunamap
