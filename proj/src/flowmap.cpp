#include "lunamap/flowmap.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "lunamap/rk4.hpp"

namespace lunamap {

namespace {

Vec6<Tps> to_vec(const std::array<Tps, 6>& a) {
    Vec6<Tps> v;
    for (int i = 0; i < 6; ++i) v[i] = a[i];
    return v;
}

std::array<Tps, 6> to_array(const Vec6<Tps>& v) {
    std::array<Tps, 6> a;
    for (int i = 0; i < 6; ++i) a[i] = v[i];
    return a;
}

} // namespace

State FlowMap::frame_state(std::size_t index, double dkappa) const {
    State s{};
    for (int i = 0; i < 6; ++i) s[i] = frames[index][i].evaluate({dkappa});
    return s;
}

FlowMap build_time_map(const SeriesState& init, const std::vector<double>& t_grid, int ns,
                       double trust_radius, FamilyId family, const SystemParams& p) {
    if (t_grid.empty() || t_grid.front() != 0.0) {
        throw std::invalid_argument("build_time_map: grid must start at 0");
    }
    for (std::size_t i = 0; i + 1 < t_grid.size(); ++i) {
        if (t_grid[i + 1] <= t_grid[i]) {
            throw std::invalid_argument("build_time_map: grid must be strictly increasing");
        }
    }

    FlowMap map;
    map.mode = GridMode::AbsoluteTime;
    map.family = family;
    map.mu = p.mu;
    map.kappa_hat = init.op_point;
    map.order = init.state[0].order();
    map.ns = ns;
    map.trust_radius = trust_radius;
    map.grid = t_grid;
    map.period_map = init.period;

    // Shortest in-trust period bounds the step.
    double t_min = init.period.evaluate({0.0});
    t_min = std::min(t_min, init.period.evaluate({-trust_radius}));
    t_min = std::min(t_min, init.period.evaluate({+trust_radius}));
    if (t_min <= 0.0) throw DomainError("build_time_map: non-positive period in trust region");
    const double h_max = t_min / ns;

    const auto f = [&p](const Vec6<Tps>& s) { return cr3bp_rhs(s, p); };
    Vec6<Tps> s = to_vec(init.state);
    map.frames.push_back(to_array(s));
    for (std::size_t j = 0; j + 1 < t_grid.size(); ++j) {
        const double span = t_grid[j + 1] - t_grid[j];
        const int substeps = std::max(1, static_cast<int>(std::ceil(span / h_max)));
        const double h = span / substeps;
        try {
            for (int k = 0; k < substeps; ++k) s = rk4_step(f, s, h);
        } catch (const DomainError& e) {
            std::ostringstream msg;
            msg << "build_time_map: " << e.what() << " between t = " << t_grid[j] << " and "
                << t_grid[j + 1];
            throw DomainError(msg.str());
        }
        map.frames.push_back(to_array(s));
    }
    return map;
}

FlowMap build_normalized_map(const SeriesState& init, int ns, double trust_radius,
                             FamilyId family, const SystemParams& p) {
    if (ns < 1) throw std::invalid_argument("build_normalized_map: ns must be >= 1");
    if (init.period.constant_part() <= 0.0) {
        throw DomainError("build_normalized_map: period constant part must be positive");
    }

    FlowMap map;
    map.mode = GridMode::NormalizedTime;
    map.family = family;
    map.mu = p.mu;
    map.kappa_hat = init.op_point;
    map.order = init.state[0].order();
    map.ns = ns;
    map.trust_radius = trust_radius;
    map.period_map = init.period;

    const Tps h = init.period / static_cast<double>(ns); // series-valued sampling time
    const auto f = [&p](const Vec6<Tps>& s) { return cr3bp_rhs(s, p); };
    Vec6<Tps> s = to_vec(init.state);
    map.grid.reserve(ns + 1);
    map.frames.reserve(ns + 1);
    map.grid.push_back(0.0);
    map.frames.push_back(to_array(s));
    for (int j = 1; j <= ns; ++j) {
        try {
            s = rk4_step(f, s, h);
        } catch (const DomainError& e) {
            std::ostringstream msg;
            msg << "build_normalized_map: " << e.what() << " at eta = "
                << static_cast<double>(j) / ns;
            throw DomainError(msg.str());
        }
        map.grid.push_back(static_cast<double>(j) / ns);
        map.frames.push_back(to_array(s));
    }
    return map;
}

MapQuery query_state(const FlowMap& map, double dkappa, double instant, const SystemParams& p) {
    MapQuery out;
    out.within_trust = std::abs(dkappa) <= map.trust_radius;

    if (instant < map.grid.front() || instant > map.grid.back()) {
        std::ostringstream msg;
        msg << "query_state: instant " << instant << " outside grid span [" << map.grid.front()
            << ", " << map.grid.back() << "]";
        throw DomainError(msg.str());
    }

    const auto it = std::lower_bound(map.grid.begin(), map.grid.end(), instant);
    std::size_t hi = static_cast<std::size_t>(it - map.grid.begin());
    if (map.grid[hi] == instant) {
        out.state = map.frame_state(hi, dkappa);
        return out;
    }
    const std::size_t lo = hi - 1;

    const State s0 = map.frame_state(lo, dkappa);
    const State s1 = map.frame_state(hi, dkappa);

    // Physical time across the interval: grid spacing in absolute mode, the
    // member's own sampling time in normalized mode.
    const double dt_grid = map.grid[hi] - map.grid[lo];
    double dt;
    if (map.mode == GridMode::NormalizedTime) {
        const double period = map.period_map.evaluate({dkappa});
        if (period <= 0.0) throw DomainError("query_state: non-positive period at this dkappa");
        dt = dt_grid * period;
    } else {
        dt = dt_grid;
    }

    const State m0 = cr3bp_rhs(s0, p);
    const State m1 = cr3bp_rhs(s1, p);
    const double theta = (instant - map.grid[lo]) / dt_grid;
    const double t2 = theta * theta;
    const double t3 = t2 * theta;
    const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    const double h10 = t3 - 2.0 * t2 + theta;
    const double h01 = -2.0 * t3 + 3.0 * t2;
    const double h11 = t3 - t2;
    for (int i = 0; i < 6; ++i) {
        out.state[i] = h00 * s0[i] + h10 * dt * m0[i] + h01 * s1[i] + h11 * dt * m1[i];
    }
    return out;
}

double time_to_eta(const FlowMap& map, double dkappa, double t) {
    if (map.mode != GridMode::NormalizedTime) {
        throw std::invalid_argument("time_to_eta: needs a normalized-time map");
    }
    const double period = map.period_map.evaluate({dkappa});
    if (period <= 0.0) throw DomainError("time_to_eta: non-positive period at this dkappa");
    return t / period;
}

namespace {

double sq_distance(const FlowMap& map, const std::array<double, 3>& pos, double dkappa,
                   double eta, const SystemParams& p) {
    // Wrap eta into the periodic domain for refinement excursions.
    double e = eta - std::floor(eta);
    const State s = query_state(map, dkappa, e, p).state;
    const double dx = s.x() - pos[0];
    const double dy = s.y() - pos[1];
    const double dz = s.z() - pos[2];
    return dx * dx + dy * dy + dz * dz;
}

} // namespace

NearestResult nearest_member(const FlowMap& map, const std::array<double, 3>& position,
                             const SystemParams& p, const NearestResult* hint,
                             int kappa_samples) {
    if (map.mode != GridMode::NormalizedTime) {
        throw std::invalid_argument("nearest_member: needs a normalized-time map");
    }

    double best_k = 0.0, best_eta = 0.0;
    double best_d = 1e300;
    double cell_k = map.trust_radius / std::max(1, kappa_samples / 2);
    double cell_eta = 1.0 / map.ns;

    if (hint != nullptr) {
        best_k = hint->dkappa;
        best_eta = hint->eta;
        best_d = sq_distance(map, position, best_k, best_eta, p);
    } else {
        // Coarse scan: dkappa outer, eta inner, strict improvement only, so
        // ties resolve toward the smaller eta.
        for (int ik = 0; ik <= kappa_samples; ++ik) {
            const double dk = -map.trust_radius + 2.0 * map.trust_radius * ik / kappa_samples;
            for (std::size_t j = 0; j < map.frames.size(); ++j) {
                const State s = map.frame_state(j, dk);
                const double dx = s.x() - position[0];
                const double dy = s.y() - position[1];
                const double dz = s.z() - position[2];
                const double d = dx * dx + dy * dy + dz * dz;
                if (d < best_d) {
                    best_d = d;
                    best_k = dk;
                    best_eta = map.grid[j];
                }
            }
        }
    }

    // Nelder-Mead on the squared distance over (dkappa, eta).
    struct Vertex {
        double k, e, f;
    };
    auto eval = [&](double k, double e) {
        k = std::clamp(k, -map.trust_radius, map.trust_radius);
        return sq_distance(map, position, k, e, p);
    };
    std::array<Vertex, 3> simplex{{{best_k, best_eta, best_d},
                                   {best_k + 0.5 * cell_k, best_eta, 0.0},
                                   {best_k, best_eta + 0.5 * cell_eta, 0.0}}};
    simplex[1].k = std::clamp(simplex[1].k, -map.trust_radius, map.trust_radius);
    simplex[1].f = eval(simplex[1].k, simplex[1].e);
    simplex[2].f = eval(simplex[2].k, simplex[2].e);

    for (int it = 0; it < 200; ++it) {
        std::sort(simplex.begin(), simplex.end(),
                  [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
        const double size = std::max(std::abs(simplex[2].k - simplex[0].k),
                                     std::abs(simplex[2].e - simplex[0].e));
        if (size < 1e-13) break;

        const double ck = 0.5 * (simplex[0].k + simplex[1].k);
        const double ce = 0.5 * (simplex[0].e + simplex[1].e);
        const double rk = ck + (ck - simplex[2].k);
        const double re = ce + (ce - simplex[2].e);
        const double fr = eval(rk, re);
        if (fr < simplex[0].f) {
            const double ek = ck + 2.0 * (ck - simplex[2].k);
            const double ee = ce + 2.0 * (ce - simplex[2].e);
            const double fe = eval(ek, ee);
            simplex[2] = fe < fr ? Vertex{ek, ee, fe} : Vertex{rk, re, fr};
        } else if (fr < simplex[1].f) {
            simplex[2] = {rk, re, fr};
        } else {
            const double kk = ck + 0.5 * (simplex[2].k - ck);
            const double ke = ce + 0.5 * (simplex[2].e - ce);
            const double fk = eval(kk, ke);
            if (fk < simplex[2].f) {
                simplex[2] = {kk, ke, fk};
            } else {
                for (int i = 1; i < 3; ++i) {
                    simplex[i].k = simplex[0].k + 0.5 * (simplex[i].k - simplex[0].k);
                    simplex[i].e = simplex[0].e + 0.5 * (simplex[i].e - simplex[0].e);
                    simplex[i].f = eval(simplex[i].k, simplex[i].e);
                }
            }
        }
    }
    std::sort(simplex.begin(), simplex.end(),
              [](const Vertex& a, const Vertex& b) { return a.f < b.f; });

    NearestResult out;
    out.dkappa = std::clamp(simplex[0].k, -map.trust_radius, map.trust_radius);
    out.kappa = map.kappa_hat + out.dkappa;
    out.eta = simplex[0].e - std::floor(simplex[0].e);
    out.distance = std::sqrt(simplex[0].f);
    return out;
}

std::string to_json_string(const FlowMap& map) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["mode"] = map.mode == GridMode::AbsoluteTime ? "time" : "normalized";
    j["family_id"] = family_name(map.family);
    j["mu"] = map.mu;
    j["kappa_hat"] = map.kappa_hat;
    j["order"] = map.order;
    j["ns"] = map.ns;
    j["trust_radius"] = map.trust_radius;
    j["grid"] = map.grid;
    j["period_map"] = nlohmann::json::parse(map.period_map.to_json_string());
    auto& frames = j["frames"] = nlohmann::json::array();
    for (const auto& f : map.frames) {
        nlohmann::json frame = nlohmann::json::array();
        for (const auto& c : f) frame.push_back(nlohmann::json::parse(c.to_json_string()));
        frames.push_back(std::move(frame));
    }
    return j.dump();
}

FlowMap flow_map_from_json_string(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema_version").get<int>() != 1) {
        throw std::invalid_argument("flow map file: unknown schema version");
    }
    FlowMap map;
    map.mode = j.at("mode").get<std::string>() == "time" ? GridMode::AbsoluteTime
                                                         : GridMode::NormalizedTime;
    map.family = family_from_name(j.at("family_id").get<std::string>());
    map.mu = j.at("mu").get<double>();
    map.kappa_hat = j.at("kappa_hat").get<double>();
    map.order = j.at("order").get<int>();
    map.ns = j.at("ns").get<int>();
    map.trust_radius = j.at("trust_radius").get<double>();
    map.grid = j.at("grid").get<std::vector<double>>();
    map.period_map = Tps::from_json_string(j.at("period_map").dump());
    for (const auto& frame : j.at("frames")) {
        std::array<Tps, 6> f;
        for (int i = 0; i < 6; ++i) f[i] = Tps::from_json_string(frame.at(i).dump());
        map.frames.push_back(std::move(f));
    }
    return map;
}

} // namespace lunamap
