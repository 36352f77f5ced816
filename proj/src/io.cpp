#include "lunamap/io.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace lunamap {

namespace {

using nlohmann::json;

void require_version(const json& j, const char* what) {
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kSchemaVersion) {
        throw std::invalid_argument(std::string(what) + ": unknown schema version");
    }
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_family_csv(const FamilyTable& table, const std::string& path) {
    std::ostringstream out;
    out << "# family table schema v" << kSchemaVersion << " family=" << family_name(table.family)
        << " mu=" << fmt(table.mu) << " ds=" << fmt(table.step) << "\n";
    out << "family_id,kappa,x,y,z,vx,vy,vz,period,res_y,res_vx,res_vz\n";
    for (const auto& m : table.members) {
        out << family_name(m.family) << ',' << fmt(m.kappa);
        for (int i = 0; i < 6; ++i) out << ',' << fmt(m.x0[i]);
        out << ',' << fmt(m.period) << ',' << fmt(m.res_y) << ',' << fmt(m.res_vx) << ','
            << fmt(m.res_vz) << "\n";
    }
    write_text_file(path, out.str());
}

std::string family_table_to_json(const FamilyTable& table) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["family_id"] = family_name(table.family);
    j["mu"] = table.mu;
    j["ds"] = table.step;
    j["stop_reason"] = table.stop_reason;
    j["folds"] = table.folds;
    j["step_used"] = table.step_used;
    auto& members = j["members"] = json::array();
    for (const auto& m : table.members) {
        json rec;
        rec["kappa"] = m.kappa;
        rec["x0"] = std::vector<double>(m.x0.c.begin(), m.x0.c.end());
        rec["period"] = m.period;
        rec["residuals"] = {m.res_y, m.res_vx, m.res_vz};
        members.push_back(std::move(rec));
    }
    auto& tangents = j["tangents"] = json::array();
    for (const auto& t : table.tangents) {
        tangents.push_back({t.x0, t.z0, t.ydot0, t.t_half});
    }
    return j.dump();
}

FamilyTable family_table_from_json(const std::string& text) {
    const json j = json::parse(text);
    require_version(j, "family table");
    FamilyTable table;
    table.family = family_from_name(j.at("family_id").get<std::string>());
    table.mu = j.at("mu").get<double>();
    table.step = j.at("ds").get<double>();
    table.stop_reason = j.at("stop_reason").get<std::string>();
    table.folds = j.at("folds").get<std::vector<std::size_t>>();
    table.step_used = j.at("step_used").get<std::vector<double>>();
    for (const auto& rec : j.at("members")) {
        OrbitMember m;
        m.family = table.family;
        m.kappa = rec.at("kappa").get<double>();
        const auto x0 = rec.at("x0").get<std::vector<double>>();
        if (x0.size() != 6) throw std::invalid_argument("family table: bad state length");
        for (int i = 0; i < 6; ++i) m.x0[i] = x0[i];
        m.period = rec.at("period").get<double>();
        const auto res = rec.at("residuals").get<std::vector<double>>();
        m.res_y = res.at(0);
        m.res_vx = res.at(1);
        m.res_vz = res.at(2);
        table.members.push_back(m);
    }
    for (const auto& rec : j.at("tangents")) {
        table.tangents.push_back({rec.at(0).get<double>(), rec.at(1).get<double>(),
                                  rec.at(2).get<double>(), rec.at(3).get<double>()});
    }
    return table;
}

namespace {

json region_to_json(const RegionFit& r) {
    json j;
    j["lower"] = r.lower;
    j["upper"] = r.upper;
    j["op_point"] = r.op_point;
    j["scale"] = r.scale;
    j["basis"] = "chebyshev";
    j["coeff_z0"] = r.coeff_z0;
    j["coeff_ydot0"] = r.coeff_ydot0;
    j["coeff_period"] = r.coeff_period;
    j["rms"] = {r.rms_z0, r.rms_ydot0, r.rms_period};
    j["condition"] = r.condition;
    return j;
}

RegionFit region_from_json(const json& j) {
    RegionFit r;
    r.lower = j.at("lower").get<double>();
    r.upper = j.at("upper").get<double>();
    r.op_point = j.at("op_point").get<double>();
    r.scale = j.at("scale").get<double>();
    if (j.at("basis").get<std::string>() != "chebyshev") {
        throw std::invalid_argument("model region: unknown basis");
    }
    r.coeff_z0 = j.at("coeff_z0").get<std::vector<double>>();
    r.coeff_ydot0 = j.at("coeff_ydot0").get<std::vector<double>>();
    r.coeff_period = j.at("coeff_period").get<std::vector<double>>();
    const auto rms = j.at("rms").get<std::vector<double>>();
    r.rms_z0 = rms.at(0);
    r.rms_ydot0 = rms.at(1);
    r.rms_period = rms.at(2);
    r.condition = j.at("condition").get<double>();
    return r;
}

} // namespace

std::string global_model_to_json(const GlobalModel& model) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "global";
    j["family_id"] = family_name(model.family);
    j["mu"] = model.mu;
    j["degree"] = model.degree;
    j["kappa_min"] = model.kappa_min;
    j["kappa_max"] = model.kappa_max;
    auto& regions = j["regions"] = json::array();
    for (const auto& r : model.regions) regions.push_back(region_to_json(r));
    return j.dump();
}

GlobalModel global_model_from_json(const std::string& text) {
    const json j = json::parse(text);
    require_version(j, "model file");
    if (j.at("kind").get<std::string>() != "global") {
        throw std::invalid_argument("model file: expected a global model");
    }
    GlobalModel model;
    model.family = family_from_name(j.at("family_id").get<std::string>());
    model.mu = j.at("mu").get<double>();
    model.degree = j.at("degree").get<int>();
    model.kappa_min = j.at("kappa_min").get<double>();
    model.kappa_max = j.at("kappa_max").get<double>();
    for (const auto& r : j.at("regions")) model.regions.push_back(region_from_json(r));
    return model;
}

std::string local_model_to_json(const LocalModel& model) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "local";
    j["family_id"] = family_name(model.family);
    j["mu"] = model.mu;
    j["degree"] = model.degree;
    j["window"] = model.window;
    j["op_point"] = model.op_point;
    j["scale"] = model.scale;
    j["window_lo"] = model.window_lo;
    j["window_hi"] = model.window_hi;
    j["basis"] = "chebyshev";
    j["coeff_z0"] = model.coeff_z0;
    j["coeff_ydot0"] = model.coeff_ydot0;
    j["coeff_period"] = model.coeff_period;
    return j.dump();
}

LocalModel local_model_from_json(const std::string& text) {
    const json j = json::parse(text);
    require_version(j, "model file");
    if (j.at("kind").get<std::string>() != "local") {
        throw std::invalid_argument("model file: expected a local model");
    }
    LocalModel model;
    model.family = family_from_name(j.at("family_id").get<std::string>());
    model.mu = j.at("mu").get<double>();
    model.degree = j.at("degree").get<int>();
    model.window = j.at("window").get<int>();
    model.op_point = j.at("op_point").get<double>();
    model.scale = j.at("scale").get<double>();
    model.window_lo = j.at("window_lo").get<double>();
    model.window_hi = j.at("window_hi").get<double>();
    model.coeff_z0 = j.at("coeff_z0").get<std::vector<double>>();
    model.coeff_ydot0 = j.at("coeff_ydot0").get<std::vector<double>>();
    model.coeff_period = j.at("coeff_period").get<std::vector<double>>();
    return model;
}

void write_control_csv(const ControlRun& run, const std::string& impulses_path,
                       const std::string& trajectory_path) {
    std::ostringstream imp;
    imp << "# control impulses schema v" << kSchemaVersion << "\n";
    imp << "t,x,y,z,vx,vy,vz,dvx,dvy,dvz,dv_norm,kappa0,eta0\n";
    std::size_t cursor = 0;
    for (const auto& i : run.impulses) {
        while (cursor < run.trajectory.size() && run.trajectory[cursor][0] != i.t) ++cursor;
        const auto& pre = run.trajectory[cursor]; // pre-burn sample
        imp << fmt(i.t);
        for (int c = 1; c <= 6; ++c) imp << ',' << fmt(pre[c]);
        imp << ',' << fmt(i.dv[0]) << ',' << fmt(i.dv[1]) << ',' << fmt(i.dv[2]) << ','
            << fmt(i.dv_norm) << ',' << fmt(i.kappa0) << ',' << fmt(i.eta0) << "\n";
        cursor += 2;
    }
    write_text_file(impulses_path, imp.str());

    std::ostringstream traj;
    traj << "# control trajectory schema v" << kSchemaVersion << "\n";
    traj << "t,x,y,z,vx,vy,vz\n";
    for (const auto& row : run.trajectory) {
        traj << fmt(row[0]);
        for (int c = 1; c <= 6; ++c) traj << ',' << fmt(row[c]);
        traj << "\n";
    }
    write_text_file(trajectory_path, traj.str());
}

std::string control_summary_json(const ControlRun& run, const PdConfig& cfg) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["total_dv"] = run.total_dv;
    j["converged"] = run.converged;
    j["convergence_revolution"] = run.convergence_revolution;
    j["escaped"] = run.escaped;
    j["escape_time"] = run.escape_time;
    j["transfers"] = run.impulses.size();
    j["config"] = {{"kp", cfg.kp},
                   {"kd", cfg.kd},
                   {"eta_t", cfg.eta_t},
                   {"revs", cfg.revs},
                   {"seed", cfg.seed},
                   {"disturbance", cfg.disturbance},
                   {"dv_threshold", cfg.dv_threshold},
                   {"consecutive", cfg.consecutive}};
    return j.dump(2);
}

void write_loci_csv(const FlowMap& map, const std::vector<double>& instants,
                    const std::vector<double>& dkappas, const SystemParams& p,
                    const std::string& path) {
    std::ostringstream out;
    out << "# family loci schema v" << kSchemaVersion << " mode="
        << (map.mode == GridMode::AbsoluteTime ? "time" : "normalized")
        << " kappa_hat=" << fmt(map.kappa_hat) << "\n";
    out << "instant,dkappa,kappa,x,y,z,vx,vy,vz\n";
    for (const double instant : instants) {
        for (const double dk : dkappas) {
            const State s = query_state(map, dk, instant, p).state;
            out << fmt(instant) << ',' << fmt(dk) << ',' << fmt(map.kappa_hat + dk);
            for (int i = 0; i < 6; ++i) out << ',' << fmt(s[i]);
            out << "\n";
        }
    }
    write_text_file(path, out.str());
}

} // namespace lunamap
