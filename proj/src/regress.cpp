#include "lunamap/regress.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace lunamap {

namespace {

// Chebyshev design matrix on points already scaled into [-1, 1].
Eigen::MatrixXd cheb_design(const std::vector<double>& s, int degree) {
    Eigen::MatrixXd v(s.size(), degree + 1);
    for (std::size_t r = 0; r < s.size(); ++r) {
        v(r, 0) = 1.0;
        if (degree >= 1) v(r, 1) = s[r];
        for (int k = 2; k <= degree; ++k) {
            v(r, k) = 2.0 * s[r] * v(r, k - 1) - v(r, k - 2);
        }
    }
    return v;
}

// Clenshaw evaluation, generic over the scalar ring so the same code yields
// plain values and truncated series.
template <class S>
S clenshaw(const std::vector<double>& coeffs, const S& s, const S& one) {
    if (coeffs.empty()) return one * 0.0;
    S b1 = one * 0.0;
    S b2 = one * 0.0;
    for (std::size_t k = coeffs.size(); k-- > 1;) {
        S b0 = 2.0 * (s * b1) - b2 + coeffs[k] * one;
        b2 = b1;
        b1 = b0;
    }
    return s * b1 - b2 + coeffs[0] * one;
}

struct FitResult {
    std::vector<double> coeffs;
    double rms = 0.0;
    double condition = 0.0;
};

FitResult solve_ls(const Eigen::MatrixXd& v, const Eigen::VectorXd& y) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(v);
    const Eigen::VectorXd c = qr.solve(y);
    const double rms = std::sqrt((v * c - y).squaredNorm() / y.size());
    FitResult out;
    out.coeffs.assign(c.data(), c.data() + c.size());
    out.rms = rms;
    const auto& r = qr.matrixR();
    double dmax = 0.0, dmin = 1e300;
    for (int i = 0; i < std::min(r.rows(), r.cols()); ++i) {
        const double d = std::abs(r(i, i));
        dmax = std::max(dmax, d);
        dmin = std::min(dmin, d);
    }
    out.condition = dmin > 0.0 ? dmax / dmin : 1e300;
    return out;
}

void require_monotone(const FamilyTable& table) {
    for (std::size_t i = 0; i + 1 < table.members.size(); ++i) {
        if ((table.members[i + 1].kappa - table.members[i].kappa) *
                (table.members[1].kappa - table.members[0].kappa) <=
            0.0) {
            throw FitError(
                "fit: family parameter is not monotone over the table; fit a fold-free segment");
        }
    }
}

} // namespace

std::size_t GlobalModel::region_index(double kappa) const {
    if (!in_domain(kappa)) {
        std::ostringstream msg;
        msg << "model domain is [" << kappa_min << ", " << kappa_max << "], got " << kappa;
        throw DomainError(msg.str());
    }
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const bool last = i + 1 == regions.size();
        if (kappa >= regions[i].lower && (kappa < regions[i].upper || (last && kappa <= regions[i].upper))) {
            return i;
        }
    }
    throw DomainError("region_index: no active region (gap in partition)");
}

GlobalModel fit_global(const FamilyTable& table, int region_count, int degree,
                       const FitOptions& opts) {
    if (region_count < 1 || degree < 1) throw std::invalid_argument("fit_global: bad shape");
    if (table.members.empty()) throw std::invalid_argument("fit_global: empty table");
    require_monotone(table);

    const bool halo = is_halo(table.family);

    std::vector<const OrbitMember*> sorted;
    sorted.reserve(table.members.size());
    for (const auto& m : table.members) sorted.push_back(&m);
    std::sort(sorted.begin(), sorted.end(),
              [](const OrbitMember* a, const OrbitMember* b) { return a->kappa < b->kappa; });

    GlobalModel model;
    model.family = table.family;
    model.mu = table.mu;
    model.degree = degree;
    model.kappa_min = sorted.front()->kappa;
    model.kappa_max = sorted.back()->kappa;

    const double width = (model.kappa_max - model.kappa_min) / region_count;
    std::size_t cursor = 0;
    for (int r = 0; r < region_count; ++r) {
        RegionFit region;
        region.lower = model.kappa_min + r * width;
        region.upper = r + 1 == region_count ? model.kappa_max : model.kappa_min + (r + 1) * width;

        std::vector<const OrbitMember*> in_region;
        while (cursor < sorted.size() &&
               (sorted[cursor]->kappa < region.upper || r + 1 == region_count)) {
            in_region.push_back(sorted[cursor]);
            ++cursor;
        }
        if (static_cast<int>(in_region.size()) < degree + 1) {
            std::ostringstream msg;
            msg << "fit_global: region " << r << " has " << in_region.size()
                << " members for degree " << degree << " (need >= " << degree + 1 << ")";
            throw FitError(msg.str());
        }

        double mean = 0.0;
        for (const auto* m : in_region) mean += m->kappa;
        mean /= in_region.size();
        region.op_point = mean;
        region.scale = std::max(region.upper - mean, mean - region.lower);

        std::vector<double> s(in_region.size());
        for (std::size_t i = 0; i < in_region.size(); ++i) {
            s[i] = (in_region[i]->kappa - region.op_point) / region.scale;
        }
        const Eigen::MatrixXd v = cheb_design(s, degree);

        auto fit_output = [&](auto getter, std::vector<double>& coeffs, double& rms) {
            Eigen::VectorXd y(in_region.size());
            for (std::size_t i = 0; i < in_region.size(); ++i) y(i) = getter(*in_region[i]);
            const FitResult fr = solve_ls(v, y);
            coeffs = fr.coeffs;
            rms = fr.rms;
            region.condition = std::max(region.condition, fr.condition);
            const double scale_y = std::max(1e-30, std::sqrt(y.squaredNorm() / y.size()));
            if (fr.rms / scale_y > opts.max_relative_rms) {
                std::ostringstream msg;
                msg << "fit_global: region " << r << " residual rms " << fr.rms
                    << " stagnates above tolerance (relative " << fr.rms / scale_y
                    << ", condition " << fr.condition << ")";
                throw FitError(msg.str());
            }
        };

        if (halo) {
            fit_output([](const OrbitMember& m) { return m.x0.z(); }, region.coeff_z0, region.rms_z0);
        }
        fit_output([](const OrbitMember& m) { return m.x0.vy(); }, region.coeff_ydot0, region.rms_ydot0);
        fit_output([](const OrbitMember& m) { return m.period; }, region.coeff_period, region.rms_period);

        model.regions.push_back(std::move(region));
    }
    return model;
}

LocalModel fit_local(const FamilyTable& table, std::size_t member_index, int window, int degree) {
    if (member_index >= table.members.size()) throw std::invalid_argument("fit_local: bad index");
    if (window < degree + 1) throw std::invalid_argument("fit_local: window < degree + 1");
    require_monotone(table);

    // Symmetric neighbourhood, clamped at the table ends.
    const std::size_t n = table.members.size();
    if (static_cast<std::size_t>(window) > n) throw FitError("fit_local: not enough neighbours in table");
    std::size_t lo = member_index >= static_cast<std::size_t>(window / 2) ? member_index - window / 2 : 0;
    if (lo + window > n) lo = n - window;

    const bool halo = is_halo(table.family);
    LocalModel model;
    model.family = table.family;
    model.mu = table.mu;
    model.degree = degree;
    model.window = window;
    model.op_point = table.members[member_index].kappa;

    std::vector<double> kappas(window);
    for (int i = 0; i < window; ++i) kappas[i] = table.members[lo + i].kappa;
    const auto [kmin, kmax] = std::minmax_element(kappas.begin(), kappas.end());
    model.window_lo = *kmin;
    model.window_hi = *kmax;
    model.scale = std::max(model.op_point - *kmin, *kmax - model.op_point);

    std::vector<double> s(window);
    for (int i = 0; i < window; ++i) s[i] = (kappas[i] - model.op_point) / model.scale;
    const Eigen::MatrixXd v = cheb_design(s, degree);

    auto fit_output = [&](auto getter, std::vector<double>& coeffs) {
        Eigen::VectorXd y(window);
        for (int i = 0; i < window; ++i) y(i) = getter(table.members[lo + i]);
        coeffs = solve_ls(v, y).coeffs;
    };
    if (halo) fit_output([](const OrbitMember& m) { return m.x0.z(); }, model.coeff_z0);
    fit_output([](const OrbitMember& m) { return m.x0.vy(); }, model.coeff_ydot0);
    fit_output([](const OrbitMember& m) { return m.period; }, model.coeff_period);
    return model;
}

namespace {

ModelState assemble(double kappa, double z0, double ydot0, double period) {
    ModelState out;
    out.x0[0] = kappa;
    out.x0[2] = z0;
    out.x0[4] = ydot0;
    out.period = period;
    return out;
}

} // namespace

ModelState evaluate_model(const GlobalModel& model, double kappa) {
    const RegionFit& reg = model.regions[model.region_index(kappa)];
    const double s = (kappa - reg.op_point) / reg.scale;
    const double z0 = reg.coeff_z0.empty() ? 0.0 : clenshaw(reg.coeff_z0, s, 1.0);
    return assemble(kappa, z0, clenshaw(reg.coeff_ydot0, s, 1.0), clenshaw(reg.coeff_period, s, 1.0));
}

ModelState evaluate_model(const LocalModel& model, double kappa) {
    const double s = (kappa - model.op_point) / model.scale;
    const double z0 = model.coeff_z0.empty() ? 0.0 : clenshaw(model.coeff_z0, s, 1.0);
    return assemble(kappa, z0, clenshaw(model.coeff_ydot0, s, 1.0), clenshaw(model.coeff_period, s, 1.0));
}

namespace {

SeriesState series_from(const std::vector<double>& cz, const std::vector<double>& cy,
                        const std::vector<double>& cp, double op_point, double s0, double scale,
                        int order) {
    const Tps one(1.0, 1, order);
    const Tps s = Tps(s0, 1, order) + Tps::variable(0, 1, order) / scale;

    SeriesState out;
    out.op_point = op_point;
    out.state[0] = Tps(op_point, 1, order) + Tps::variable(0, 1, order);
    out.state[1] = Tps(0.0, 1, order);
    out.state[2] = cz.empty() ? Tps(0.0, 1, order) : clenshaw(cz, s, one);
    out.state[3] = Tps(0.0, 1, order);
    out.state[4] = clenshaw(cy, s, one);
    out.state[5] = Tps(0.0, 1, order);
    out.period = clenshaw(cp, s, one);
    return out;
}

} // namespace

SeriesState to_series(const GlobalModel& model, double op_point, int order) {
    const RegionFit& reg = model.regions[model.region_index(op_point)];
    const double s0 = (op_point - reg.op_point) / reg.scale;
    return series_from(reg.coeff_z0, reg.coeff_ydot0, reg.coeff_period, op_point, s0, reg.scale, order);
}

SeriesState to_series(const LocalModel& model, double op_point, int order) {
    const double s0 = (op_point - model.op_point) / model.scale;
    return series_from(model.coeff_z0, model.coeff_ydot0, model.coeff_period, op_point, s0,
                       model.scale, order);
}

} // namespace lunamap
