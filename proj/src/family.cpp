#include "lunamap/family.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "lunamap/rk4.hpp"

namespace lunamap {

std::string family_name(FamilyId id) {
    switch (id) {
        case FamilyId::L1Lyapunov: return "L1-Lyap";
        case FamilyId::L2Lyapunov: return "L2-Lyap";
        case FamilyId::L1Halo: return "L1-Halo";
        case FamilyId::L2Halo: return "L2-Halo";
    }
    return "?";
}

FamilyId family_from_name(const std::string& s) {
    if (s == "L1-Lyap") return FamilyId::L1Lyapunov;
    if (s == "L2-Lyap") return FamilyId::L2Lyapunov;
    if (s == "L1-Halo") return FamilyId::L1Halo;
    if (s == "L2-Halo") return FamilyId::L2Halo;
    throw std::invalid_argument("unknown family id: " + s);
}

bool is_halo(FamilyId id) { return id == FamilyId::L1Halo || id == FamilyId::L2Halo; }

Libration libration_of(FamilyId id) {
    return (id == FamilyId::L1Lyapunov || id == FamilyId::L1Halo) ? Libration::L1 : Libration::L2;
}

FamilyId halo_counterpart(FamilyId planar) {
    switch (planar) {
        case FamilyId::L1Lyapunov: return FamilyId::L1Halo;
        case FamilyId::L2Lyapunov: return FamilyId::L2Halo;
        default: throw std::invalid_argument("halo_counterpart: input must be a planar family");
    }
}

namespace {

// Free variables in fixed order (x0, z0, ydot0, t_half); planar families
// freeze z0 at zero.
struct FreeVars {
    double x0 = 0.0;
    double z0 = 0.0;
    double ydot0 = 0.0;
    double t_half = 0.0;
};

FreeVars fv_of(const OrbitMember& m) {
    return {m.x0.x(), m.x0.z(), m.x0.vy(), 0.5 * m.period};
}

State state_of(const FreeVars& u) {
    State s{};
    s[0] = u.x0;
    s[2] = u.z0;
    s[4] = u.ydot0;
    return s;
}

struct HalfArc {
    State end{};
    Mat6 stm = Mat6::Identity();
    State end_rhs{};
};

HalfArc propagate_half(const FreeVars& u, const SystemParams& p, const CorrectorOptions& opts) {
    const auto aug = propagate_with_stm(state_of(u), u.t_half, opts.steps_half_period, p);
    return {aug.state, aug.stm, cr3bp_rhs(aug.state, p)};
}

// Symmetry constraints F = (y, xdot[, zdot]) at the half period.
Eigen::VectorXd residuals_of(const HalfArc& arc, bool halo) {
    Eigen::VectorXd r(halo ? 3 : 2);
    r(0) = arc.end.y();
    r(1) = arc.end.vx();
    if (halo) r(2) = arc.end.vz();
    return r;
}

// Rows of dF over the full free-variable set (x0, z0, ydot0, t_half).
Eigen::MatrixXd constraint_jacobian(const HalfArc& arc, bool halo) {
    const int rows = halo ? 3 : 2;
    Eigen::MatrixXd j(rows, 4);
    const int idx[3] = {1, 3, 5}; // y, xdot, zdot state slots
    for (int r = 0; r < rows; ++r) {
        j(r, 0) = arc.stm(idx[r], 0);
        j(r, 1) = arc.stm(idx[r], 2);
        j(r, 2) = arc.stm(idx[r], 4);
        j(r, 3) = arc.end_rhs[idx[r]];
    }
    return j;
}

double sampled_min_moon_distance(const OrbitMember& m, const SystemParams& p) {
    const auto f = [&p](const State& s) { return cr3bp_rhs(s, p); };
    State s = m.x0;
    const double h = m.period / 256.0;
    double best = 1e300;
    for (int k = 0; k < 256; ++k) {
        const double dx = s.x() - (1.0 - p.mu);
        best = std::min(best, std::sqrt(dx * dx + s.y() * s.y() + s.z() * s.z()));
        s = rk4_step(f, s, h);
    }
    return best;
}

double estimate_half_period(const State& guess, FamilyId family, const SystemParams& p) {
    // Plane-crossing detection bounded to the expected window; large seeds can
    // escape along the unstable manifold before closing, in which case the
    // linearized half period is the better start.
    const double t_lin = linearized_coeffs(libration_of(family), p).linear_period();
    try {
        const auto cross = propagate_to_plane_crossing(guess, p, t_lin / 1000.0, 0.75 * t_lin);
        return cross.time;
    } catch (const ConvergenceError&) {
        return 0.5 * t_lin;
    }
}

OrbitMember member_from(const FreeVars& u, FamilyId family, const HalfArc& arc, int iters) {
    OrbitMember m;
    m.x0 = state_of(u);
    m.period = 2.0 * u.t_half;
    m.kappa = u.x0;
    m.family = family;
    m.res_y = std::abs(arc.end.y());
    m.res_vx = std::abs(arc.end.vx());
    m.res_vz = std::abs(arc.end.vz());
    m.iterations = iters;
    return m;
}

} // namespace

OrbitMember correct_half_period(const State& guess, FamilyId family, const SystemParams& p,
                                const CorrectorOptions& opts, double t_half_guess) {
    validate(p);
    if (guess.y() != 0.0 || guess.vx() != 0.0 || guess.vz() != 0.0) {
        throw std::invalid_argument("correct_half_period: guess must satisfy y = xdot = zdot = 0");
    }
    const bool halo = is_halo(family);

    FreeVars u{guess.x(), guess.z(), guess.vy(),
               t_half_guess > 0.0 ? t_half_guess : estimate_half_period(guess, family, p)};

    auto apply = [&](const FreeVars& v, const Eigen::VectorXd& delta, double scale) {
        FreeVars w = v;
        if (halo) {
            w.x0 += scale * delta(0);
            w.ydot0 += scale * delta(1);
            w.t_half += scale * delta(2);
        } else if (opts.planar_free == PlanarFree::YdotAndPeriod) {
            w.ydot0 += scale * delta(0);
            w.t_half += scale * delta(1);
        } else {
            w.x0 += scale * delta(0);
            w.t_half += scale * delta(1);
        }
        return w;
    };

    HalfArc arc = propagate_half(u, p, opts);
    double res = residuals_of(arc, halo).cwiseAbs().maxCoeff();
    int iters = 0;
    for (; iters < opts.max_iter && res >= opts.tol; ++iters) {
        const Eigen::VectorXd r = residuals_of(arc, halo);
        const Eigen::MatrixXd full = constraint_jacobian(arc, halo);
        // Column selection: halo corrects (x0, ydot0, t_half) with z0 held;
        // planar corrects two of (x0, ydot0, t_half) per the configured choice.
        Eigen::MatrixXd j;
        if (halo) {
            j.resize(3, 3);
            j.col(0) = full.col(0);
            j.col(1) = full.col(2);
            j.col(2) = full.col(3);
        } else {
            j.resize(2, 2);
            j.col(0) = opts.planar_free == PlanarFree::YdotAndPeriod ? full.col(2) : full.col(0);
            j.col(1) = full.col(3);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(j);
        if (!lu.isInvertible()) {
            throw ConvergenceError("correct_half_period: singular correction matrix (degenerate geometry)");
        }
        const Eigen::VectorXd delta = lu.solve(-r);

        // Full Newton step, halved while the residual grows.
        double scale = 1.0;
        FreeVars u_try = u;
        HalfArc arc_try;
        double res_try = res;
        for (int halvings = 0; halvings < 8; ++halvings) {
            u_try = apply(u, delta, scale);
            arc_try = propagate_half(u_try, p, opts);
            res_try = residuals_of(arc_try, halo).cwiseAbs().maxCoeff();
            if (res_try < res) break;
            scale *= 0.5;
        }
        if (res_try >= res) break; // no progress at the smallest step
        u = u_try;
        arc = arc_try;
        res = res_try;
    }

    if (res > opts.accept_tol) {
        const HalfArc& best_arc = arc;
        std::ostringstream msg;
        msg << "correct_half_period: no convergence in " << opts.max_iter
            << " iterations; residuals |y|=" << best_arc.end.y() << " |xdot|=" << best_arc.end.vx()
            << " |zdot|=" << best_arc.end.vz();
        throw ConvergenceError(msg.str());
    }
    return member_from(u, family, arc, iters);
}

TangentVector family_tangent(const OrbitMember& m, const SystemParams& p,
                             const CorrectorOptions& opts, const TangentVector* previous,
                             int direction) {
    const bool halo = is_halo(m.family);
    const HalfArc arc = propagate_half(fv_of(m), p, opts);
    const Eigen::MatrixXd full = constraint_jacobian(arc, halo);

    // Active columns: planar families drop z0.
    Eigen::MatrixXd j;
    if (halo) {
        j = full;
    } else {
        j.resize(2, 3);
        j.col(0) = full.col(0);
        j.col(1) = full.col(2);
        j.col(2) = full.col(3);
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const int n = static_cast<int>(j.cols());
    // One-dimensional null space expected: the second-smallest singular value
    // must stay well away from zero.
    if (sv(n - 2) < 1e-10 * sv(0)) {
        throw BifurcationError("family_tangent: constraint Jacobian null space has dimension > 1");
    }
    const Eigen::VectorXd v = svd.matrixV().col(n - 1);

    TangentVector t;
    if (halo) {
        t = {v(0), v(1), v(2), v(3)};
    } else {
        t = {v(0), 0.0, v(1), v(2)};
    }

    if (previous != nullptr) {
        if (t.dot(*previous) < 0.0) t = {-t.x0, -t.z0, -t.ydot0, -t.t_half};
    } else {
        const double lead = halo ? t.z0 : t.x0;
        const double ref = lead != 0.0 ? lead : t.x0 + t.z0 + t.ydot0 + t.t_half;
        if (ref * direction < 0.0) t = {-t.x0, -t.z0, -t.ydot0, -t.t_half};
    }
    return t;
}

namespace {

PacResult pac_newton(const OrbitMember& m, const TangentVector& tangent, double ds,
                     const SystemParams& p, const CorrectorOptions& opts) {
    const bool halo = is_halo(m.family);
    const int dim = halo ? 4 : 3;
    const FreeVars u0 = fv_of(m);

    Eigen::VectorXd t(dim);
    if (halo) {
        t << tangent.x0, tangent.z0, tangent.ydot0, tangent.t_half;
    } else {
        t << tangent.x0, tangent.ydot0, tangent.t_half;
    }

    Eigen::VectorXd base(dim);
    if (halo) {
        base << u0.x0, u0.z0, u0.ydot0, u0.t_half;
    } else {
        base << u0.x0, u0.ydot0, u0.t_half;
    }

    const auto fv_at = [halo](const Eigen::VectorXd& v) {
        return halo ? FreeVars{v(0), v(1), v(2), v(3)} : FreeVars{v(0), 0.0, v(1), v(2)};
    };
    const auto g_at = [&](const Eigen::VectorXd& v, const HalfArc& arc) {
        Eigen::VectorXd g(dim);
        g.head(dim - 1) = residuals_of(arc, halo);
        g(dim - 1) = (v - base).dot(t) - ds;
        return g;
    };

    Eigen::VectorXd u = base + ds * t;
    HalfArc arc = propagate_half(fv_at(u), p, opts);
    double res = g_at(u, arc).cwiseAbs().maxCoeff();
    int iters = 0;
    for (; iters < opts.max_iter && res >= opts.tol; ++iters) {
        const Eigen::VectorXd g = g_at(u, arc);
        const Eigen::MatrixXd full = constraint_jacobian(arc, halo);
        Eigen::MatrixXd j(dim, dim);
        if (halo) {
            j.topRows(3) = full;
        } else {
            j(0, 0) = full(0, 0); j(0, 1) = full(0, 2); j(0, 2) = full(0, 3);
            j(1, 0) = full(1, 0); j(1, 1) = full(1, 2); j(1, 2) = full(1, 3);
        }
        j.row(dim - 1) = t.transpose();

        Eigen::FullPivLU<Eigen::MatrixXd> lu(j);
        if (!lu.isInvertible()) {
            throw ConvergenceError("pac_step: singular augmented Jacobian");
        }
        const Eigen::VectorXd delta = lu.solve(-g);

        double scale = 1.0;
        Eigen::VectorXd u_try = u;
        HalfArc arc_try;
        double res_try = res;
        for (int halvings = 0; halvings < 8; ++halvings) {
            u_try = u + scale * delta;
            arc_try = propagate_half(fv_at(u_try), p, opts);
            res_try = g_at(u_try, arc_try).cwiseAbs().maxCoeff();
            if (res_try < res) break;
            scale *= 0.5;
        }
        if (res_try >= res) break;
        u = u_try;
        arc = arc_try;
        res = res_try;
    }

    if (res > opts.accept_tol) {
        std::ostringstream msg;
        msg << "pac_step: Newton stalled at residual " << res << " with ds = " << ds;
        throw ConvergenceError(msg.str());
    }

    PacResult out;
    out.member = member_from(fv_at(u), m.family, arc, iters);
    out.ds_used = ds;
    out.newton_iterations = iters;
    return out;
}

} // namespace

PacResult pac_step(const OrbitMember& m, const TangentVector& tangent, double ds,
                   const SystemParams& p, const CorrectorOptions& opts) {
    if (ds == 0.0) throw std::invalid_argument("pac_step: ds must be nonzero");
    double step = ds;
    for (int attempt = 0;; ++attempt) {
        try {
            return pac_newton(m, tangent, step, p, opts);
        } catch (const ConvergenceError&) {
            if (attempt >= 4) throw;
            step *= 0.5;
        }
    }
}

FamilyTable generate_family(const OrbitMember& seed, double ds, const SweepOptions& sweep,
                            const SystemParams& p, const CorrectorOptions& opts) {
    FamilyTable table;
    table.family = seed.family;
    table.mu = p.mu;
    table.step = ds;
    table.members.push_back(seed);

    TangentVector t;
    try {
        t = family_tangent(seed, p, opts, nullptr, sweep.direction);
    } catch (const std::exception& e) {
        table.stop_reason = e.what();
        return table;
    }

    int since_fold = -1;
    while (static_cast<int>(table.members.size()) < sweep.count) {
        PacResult step;
        try {
            step = pac_step(table.members.back(), t, ds, p, opts);
        } catch (const std::exception& e) {
            table.stop_reason = e.what();
            break;
        }
        table.tangents.push_back(t);
        table.step_used.push_back(step.ds_used);
        table.members.push_back(step.member);

        TangentVector t_next;
        try {
            t_next = family_tangent(step.member, p, opts, &t, sweep.direction);
        } catch (const std::exception& e) {
            table.stop_reason = e.what();
            break;
        }
        if (t_next.x0 * t.x0 < 0.0) {
            table.folds.push_back(table.members.size() - 1);
            if (since_fold < 0) since_fold = 0;
        }
        if (since_fold >= 0) {
            ++since_fold;
            if (sweep.stop_after_fold >= 0 && since_fold > sweep.stop_after_fold) {
                table.stop_reason = "fold reached";
                break;
            }
        }
        if (sweep.min_moon_distance > 0.0 &&
            sampled_min_moon_distance(step.member, p) < sweep.min_moon_distance) {
            table.stop_reason = "moon-distance floor reached";
            break;
        }
        t = t_next;
    }
    return table;
}

Mat6 monodromy(const OrbitMember& m, const SystemParams& p, const CorrectorOptions& opts) {
    return propagate_with_stm(m.x0, m.period, 2 * opts.steps_half_period, p).stm;
}

namespace {

double out_of_plane_trace(const OrbitMember& m, const SystemParams& p, const CorrectorOptions& opts) {
    const Mat6 mono = monodromy(m, p, opts);
    return mono(2, 2) + mono(5, 5);
}

} // namespace

OrbitMember seed_halo_family(const FamilyTable& planar, const SystemParams& p,
                             const CorrectorOptions& opts, OrbitMember* bifurcation_out) {
    if (is_halo(planar.family)) throw std::invalid_argument("seed_halo_family: need a planar table");
    if (planar.members.size() < 2) throw std::invalid_argument("seed_halo_family: table too short");

    // Bracket the crossing of the out-of-plane multiplier pair through +1.
    double prev = out_of_plane_trace(planar.members.front(), p, opts) - 2.0;
    std::size_t hit = 0;
    for (std::size_t i = 1; i < planar.members.size(); ++i) {
        const double cur = out_of_plane_trace(planar.members[i], p, opts) - 2.0;
        if (prev * cur <= 0.0 && cur != prev) {
            hit = i;
            break;
        }
        prev = cur;
    }
    if (hit == 0) {
        throw ConvergenceError(
            "seed_halo_family: out-of-plane multipliers never cross +1 in this table; "
            "sweep the planar family further");
    }

    // Secant refinement on kappa; the planar corrector holds x0 fixed, so the
    // refined member sits exactly at the probed parameter.
    const OrbitMember& a = planar.members[hit - 1];
    const OrbitMember& b = planar.members[hit];
    auto member_at = [&](double kappa) {
        State s{};
        s[0] = kappa;
        const double w = (kappa - a.kappa) / (b.kappa - a.kappa);
        s[4] = (1.0 - w) * a.x0.vy() + w * b.x0.vy();
        return correct_half_period(s, planar.family, p, opts,
                                   0.5 * ((1.0 - w) * a.period + w * b.period));
    };

    double k0 = a.kappa, k1 = b.kappa;
    double f0 = out_of_plane_trace(a, p, opts) - 2.0;
    double f1 = out_of_plane_trace(b, p, opts) - 2.0;
    OrbitMember pivot = b;
    for (int it = 0; it < 40 && std::abs(f1) > 1e-9 && std::abs(k1 - k0) > 1e-15; ++it) {
        const double k2 = k1 - f1 * (k1 - k0) / (f1 - f0);
        pivot = member_at(k2);
        const double f2 = out_of_plane_trace(pivot, p, opts) - 2.0;
        k0 = k1;
        f0 = f1;
        k1 = k2;
        f1 = f2;
    }

    if (bifurcation_out != nullptr) *bifurcation_out = pivot;

    // Nudge out of the plane and correct in three dimensions.
    State guess = pivot.x0;
    guess[2] = 1e-3;
    return correct_half_period(guess, halo_counterpart(planar.family), p, opts, 0.5 * pivot.period);
}

std::pair<std::size_t, std::size_t> FamilyTable::longest_monotone_range() const {
    if (members.size() < 2) return {0, members.empty() ? 0 : members.size() - 1};
    auto dir = [&](std::size_t i) {
        const double d = members[i + 1].kappa - members[i].kappa;
        return d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
    };
    std::size_t best_lo = 0, best_hi = 1, lo = 0;
    int cur = dir(0);
    for (std::size_t i = 1; i + 1 < members.size(); ++i) {
        const int d = dir(i);
        if (d != cur || d == 0) {
            lo = i;
            cur = d;
        }
        if (i + 1 - lo > best_hi - best_lo) {
            best_lo = lo;
            best_hi = i + 1;
        }
    }
    return {best_lo, best_hi};
}

ValidationReport validate_table(const FamilyTable& table, const SystemParams& p,
                                const CorrectorOptions& opts) {
    ValidationReport rep;
    rep.checked = table.members.size();
    const bool halo = is_halo(table.family);

    const auto f = [&p](const State& s) { return cr3bp_rhs(s, p); };
    double prev_jacobi = 0.0;
    int jacobi_dir = 0;

    for (std::size_t i = 0; i < table.members.size(); ++i) {
        const OrbitMember& m = table.members[i];
        if (!halo && (m.x0.z() != 0.0 || m.x0.vz() != 0.0)) {
            rep.failure = "planar member with nonzero z channel";
            return rep;
        }
        rep.max_residual = std::max({rep.max_residual, m.res_y, m.res_vx, halo ? m.res_vz : 0.0});

        // Full-period closure under the same discrete flow.
        const int nsteps = 2 * opts.steps_half_period;
        const State ret = rk4_propagate(f, m.x0, m.period, nsteps);
        double pos_err = 0.0, vel_err = 0.0;
        for (int c = 0; c < 3; ++c) {
            pos_err = std::max(pos_err, std::abs(ret[c] - m.x0[c]));
            vel_err = std::max(vel_err, std::abs(ret[c + 3] - m.x0[c + 3]));
        }
        rep.max_return_pos_err = std::max(rep.max_return_pos_err, pos_err);
        rep.max_return_vel_err = std::max(rep.max_return_vel_err, vel_err);

        // Mirror symmetry about the half period, sampled at one offset.
        const double tau = 0.2 * m.period;
        const State fwd = rk4_propagate(f, m.x0, 0.5 * m.period + tau, nsteps);
        const State bck = rk4_propagate(f, m.x0, 0.5 * m.period - tau, nsteps);
        double sym = 0.0;
        sym = std::max(sym, std::abs(fwd[0] - bck[0]));
        sym = std::max(sym, std::abs(fwd[1] + bck[1]));
        sym = std::max(sym, std::abs(fwd[2] - bck[2]));
        sym = std::max(sym, std::abs(fwd[3] + bck[3]));
        sym = std::max(sym, std::abs(fwd[4] - bck[4]));
        sym = std::max(sym, std::abs(fwd[5] + bck[5]));
        rep.max_symmetry_err = std::max(rep.max_symmetry_err, sym);

        rep.min_moon_distance.push_back(sampled_min_moon_distance(m, p));

        // Jacobi monotonicity between folds is expected but only flagged.
        const double c = jacobi_constant(m.x0, p);
        if (i > 0) {
            const int d = c > prev_jacobi ? 1 : -1;
            const bool at_fold =
                std::find(table.folds.begin(), table.folds.end(), i) != table.folds.end() ||
                std::find(table.folds.begin(), table.folds.end(), i - 1) != table.folds.end();
            if (jacobi_dir != 0 && d != jacobi_dir && !at_fold) ++rep.jacobi_monotonicity_flags;
            jacobi_dir = d;
        }
        prev_jacobi = c;
    }

    // Arclength spacing against the tangent actually used for each step.
    for (std::size_t i = 0; i + 1 < table.members.size() && i < table.tangents.size(); ++i) {
        const FreeVars ua = fv_of(table.members[i]);
        const FreeVars ub = fv_of(table.members[i + 1]);
        const TangentVector& t = table.tangents[i];
        const double proj = (ub.x0 - ua.x0) * t.x0 + (ub.z0 - ua.z0) * t.z0 +
                            (ub.ydot0 - ua.ydot0) * t.ydot0 + (ub.t_half - ua.t_half) * t.t_half;
        rep.max_spacing_err = std::max(rep.max_spacing_err, std::abs(proj - table.step_used[i]));
    }

    rep.all_ok = rep.max_return_pos_err < 1e-8 && rep.max_return_vel_err < 1e-7 &&
                 rep.max_residual < 1e-10 && rep.max_spacing_err < 1e-8 &&
                 rep.max_symmetry_err < 1e-8 && rep.failure.empty();
    if (!rep.all_ok && rep.failure.empty()) rep.failure = "tolerance exceeded";
    return rep;
}

} // namespace lunamap
