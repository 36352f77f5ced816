// Command-line driver: generate families, fit models, build maps, run the
// accuracy experiments and the station-keeping comparison.

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "lunamap/io.hpp"
#include "lunamap/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lunamap;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitUsage = 2;

struct RunConfig {
    double mu = 0.01215;
    std::string family = "L1-Lyap";
    int count = 200;
    double ds = 1e-3;
    int regions = 8;
    int degree = 30;
    int order = 5;
    int ns = 1000;
    bool local = false;
    int member = -1;
    int window = 21;
    std::string mode = "normalized";
    double op_point = 0.0; // 0 = domain midpoint
    std::string which = "hold-orbits";
    int samples = 100;
    int revs = 4;          // experiment revolutions
    int control_revs = 10; // simulated revolutions per control run
    double kp = 4.0;
    double kd = 4.0;
    double eta_t = 0.05;
    std::uint64_t seed = 1;
    double disturbance = 1e-3;
    std::string control_mode = "compare";
    std::string out;
    std::string table_file;
    std::string model_file;
    bool auto_build = true;

    json to_json() const {
        return json{{"mu", mu},
                    {"family", family},
                    {"count", count},
                    {"ds", ds},
                    {"regions", regions},
                    {"degree", degree},
                    {"order", order},
                    {"ns", ns},
                    {"local", local},
                    {"member", member},
                    {"window", window},
                    {"mode", mode},
                    {"op_point", op_point},
                    {"which", which},
                    {"samples", samples},
                    {"revs", revs},
                    {"control_revs", control_revs},
                    {"kp", kp},
                    {"kd", kd},
                    {"eta_t", eta_t},
                    {"seed", seed},
                    {"disturbance", disturbance},
                    {"control_mode", control_mode},
                    {"out", out},
                    {"table_file", table_file},
                    {"model_file", model_file},
                    {"auto_build", auto_build}};
    }

    void merge_json(const json& j) {
        auto get = [&j](const char* key, auto& slot) {
            if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
        };
        get("mu", mu);
        get("family", family);
        get("count", count);
        get("ds", ds);
        get("regions", regions);
        get("degree", degree);
        get("order", order);
        get("ns", ns);
        get("local", local);
        get("member", member);
        get("window", window);
        get("mode", mode);
        get("op_point", op_point);
        get("which", which);
        get("samples", samples);
        get("revs", revs);
        get("control_revs", control_revs);
        get("kp", kp);
        get("kd", kd);
        get("eta_t", eta_t);
        get("seed", seed);
        get("disturbance", disturbance);
        get("control_mode", control_mode);
        get("out", out);
        get("table_file", table_file);
        get("model_file", model_file);
        get("auto_build", auto_build);
    }

    PipelineOptions pipeline() const {
        PipelineOptions opts;
        opts.mu = mu;
        opts.ds_lyapunov = ds;
        opts.lyapunov_count = count;
        opts.halo_count = count;
        opts.regions = regions;
        opts.degree = degree;
        opts.order = order;
        opts.ns = ns;
        return opts;
    }

    PdConfig pd() const {
        PdConfig cfg;
        cfg.kp = kp;
        cfg.kd = kd;
        cfg.eta_t = eta_t;
        cfg.seed = seed;
        cfg.disturbance = disturbance;
        return cfg;
    }
};

fs::path ensure_outdir(const RunConfig& cfg, const std::string& command) {
    fs::path base = cfg.out;
    if (base.empty()) {
        if (const char* env = std::getenv("LUNAMAP_OUT")) base = env;
        else base = "out";
    }
    fs::create_directories(base);
    write_text_file((base / (command + "_config.json")).string(), cfg.to_json().dump(2));
    return base;
}

void validate_common(const RunConfig& cfg) {
    if (!(cfg.mu > 0.0 && cfg.mu < 0.5)) throw CLI::ValidationError("--mu must lie in (0, 0.5)");
    if (cfg.ds == 0.0) throw CLI::ValidationError("--ds must be nonzero");
    if (cfg.count < 1) throw CLI::ValidationError("--count must be >= 1");
    if (cfg.order < 1) throw CLI::ValidationError("--order must be >= 1");
    if (cfg.ns < 1) throw CLI::ValidationError("--ns must be >= 1");
    if (cfg.regions < 1 || cfg.degree < 1) throw CLI::ValidationError("--regions/--degree must be >= 1");
    if (!(cfg.eta_t > 0.0 && cfg.eta_t < 1.0)) throw CLI::ValidationError("--eta-t must lie in (0, 1)");
    if (!(cfg.kp > 0.0 && cfg.kd > 0.0)) throw CLI::ValidationError("--kp/--kd must be positive");
    family_from_name(cfg.family); // throws on unknown names
}

// Prerequisite loading with optional auto-build.
FamilyTable obtain_table(const RunConfig& cfg) {
    if (!cfg.table_file.empty()) return family_table_from_json(read_text_file(cfg.table_file));
    if (!cfg.auto_build) throw CLI::ValidationError("no --table given and --no-auto-build set");
    return build_family(family_from_name(cfg.family), cfg.pipeline());
}

GlobalModel obtain_model(const RunConfig& cfg, const FamilyTable& table) {
    if (!cfg.model_file.empty()) return global_model_from_json(read_text_file(cfg.model_file));
    if (!cfg.auto_build) throw CLI::ValidationError("no --model given and --no-auto-build set");
    return fit_family(table, cfg.pipeline());
}

int cmd_family(const RunConfig& cfg) {
    const fs::path out = ensure_outdir(cfg, "family");
    const FamilyId id = family_from_name(cfg.family);
    const PipelineOptions opts = cfg.pipeline();

    const FamilyTable table = build_family(id, opts);
    const ValidationReport rep = validate_table(table, opts.params(), opts.corrector_for(id));

    const std::string stem = family_name(id);
    write_family_csv(table, (out / (stem + ".csv")).string());
    write_text_file((out / (stem + ".json")).string(), family_table_to_json(table));

    std::cout << stem << ": " << table.members.size() << " members, " << table.folds.size()
              << " fold(s)";
    if (!table.stop_reason.empty()) std::cout << " (stopped: " << table.stop_reason << ")";
    std::cout << "\nvalidation: " << (rep.all_ok ? "ok" : rep.failure)
              << "  max return pos err " << rep.max_return_pos_err << "  max spacing err "
              << rep.max_spacing_err;
    if (rep.jacobi_monotonicity_flags > 0) {
        std::cout << "  [" << rep.jacobi_monotonicity_flags
                  << " jacobi monotonicity flag(s) away from folds]";
    }
    std::cout << std::endl;
    return rep.all_ok ? kExitOk : kExitNumerical;
}

int cmd_fit(const RunConfig& cfg) {
    const fs::path out = ensure_outdir(cfg, "fit");
    const FamilyTable table = obtain_table(cfg);
    const std::string stem = family_name(table.family);

    if (cfg.local) {
        const std::size_t index =
            cfg.member >= 0 ? static_cast<std::size_t>(cfg.member) : table.members.size() / 2;
        const LocalModel model = fit_local(table, index, cfg.window, cfg.degree);
        write_text_file((out / (stem + "_local_model.json")).string(), local_model_to_json(model));
        std::cout << "local model about kappa = " << model.op_point << ", window " << model.window
                  << ", degree " << model.degree << std::endl;
        return kExitOk;
    }

    const GlobalModel model = fit_family(table, cfg.pipeline());
    write_text_file((out / (stem + "_model.json")).string(), global_model_to_json(model));
    double worst_rms = 0.0, worst_cond = 0.0;
    for (const auto& r : model.regions) {
        worst_rms = std::max({worst_rms, r.rms_z0, r.rms_ydot0, r.rms_period});
        worst_cond = std::max(worst_cond, r.condition);
    }
    std::cout << "global model: " << model.regions.size() << " regions, degree " << model.degree
              << ", domain [" << model.kappa_min << ", " << model.kappa_max
              << "], worst rms " << worst_rms << ", worst condition " << worst_cond << std::endl;
    return kExitOk;
}

int cmd_map(const RunConfig& cfg) {
    const fs::path out = ensure_outdir(cfg, "map");
    const FamilyTable table = obtain_table(cfg);
    const GlobalModel model = obtain_model(cfg, table);

    const double op =
        cfg.op_point != 0.0 ? cfg.op_point : 0.5 * (model.kappa_min + model.kappa_max);
    const GridMode mode =
        cfg.mode == "time" ? GridMode::AbsoluteTime : GridMode::NormalizedTime;
    const FlowMap map = build_map(model, op, mode, cfg.pipeline());

    const std::string stem = family_name(model.family) + (cfg.mode == "time" ? "_tmap" : "_nmap");
    write_text_file((out / (stem + ".json")).string(), to_json_string(map));
    std::cout << stem << ": order " << map.order << ", ns " << map.ns << ", op point "
              << map.kappa_hat << ", trust radius " << map.trust_radius << std::endl;
    return kExitOk;
}

int cmd_experiment(const RunConfig& cfg) {
    const fs::path out = ensure_outdir(cfg, "experiment");
    const PipelineOptions opts = cfg.pipeline();
    const FamilyTable table = obtain_table(cfg);
    const GlobalModel model = obtain_model(cfg, table);

    if (cfg.which == "hold-orbits") {
        const auto rows = run_hold_orbits(model, cfg.samples, cfg.revs, cfg.seed, opts);
        std::ostringstream csv;
        csv << "# hold-orbits schema v" << kSchemaVersion << "\nkappa,revolution,pos_err,vel_err\n";
        std::vector<double> rms(cfg.revs, 0.0);
        for (const auto& row : rows) {
            for (int rev = 0; rev < cfg.revs; ++rev) {
                csv << row.kappa << ',' << rev + 1 << ',' << row.pos_err[rev] << ','
                    << row.vel_err[rev] << "\n";
                rms[rev] += row.pos_err[rev] * row.pos_err[rev];
            }
        }
        write_text_file((out / "hold_orbits.csv").string(), csv.str());
        std::cout << "hold-orbits: " << rows.size() << " samples; rms position error per revolution:";
        for (int rev = 0; rev < cfg.revs; ++rev) {
            std::cout << ' ' << std::sqrt(rms[rev] / rows.size());
        }
        std::cout << std::endl;
        return kExitOk;
    }

    if (cfg.which == "global-vs-local") {
        // The contrast wants a global fit with visible structure error; the
        // strongest settings tie with the local model near the member.
        PipelineOptions cmp = opts;
        cmp.regions = std::min(cfg.regions, 4);
        cmp.degree = std::min(cfg.degree, 8);
        const GlobalModel cmp_model =
            cfg.model_file.empty() ? fit_family(table, cmp) : model;
        const std::size_t designed = table.members.size() / 2;
        const int local_degree = std::min(cfg.window - 1, 14);
        const auto rows = run_global_local(table, cmp_model, designed, cfg.window, local_degree,
                                           cfg.samples, opts);
        std::ostringstream csv;
        csv << "# global-vs-local schema v" << kSchemaVersion << "\nkappa,err_global,err_local\n";
        for (const auto& row : rows) {
            csv << row.kappa << ',' << row.err_global << ',' << row.err_local << "\n";
        }
        write_text_file((out / "global_vs_local.csv").string(), csv.str());
        std::cout << "global-vs-local: designed member kappa = " << table.members[designed].kappa
                  << ", " << rows.size() << " samples" << std::endl;
        return kExitOk;
    }

    if (cfg.which == "fixed-locus") {
        const double op = 0.5 * (model.kappa_min + model.kappa_max);
        const FlowMap nmap = build_map(model, op, GridMode::NormalizedTime, opts);
        const FlowMap tmap = build_map(model, op, GridMode::AbsoluteTime, opts);
        const double trust = nmap.trust_radius;
        std::vector<double> dks;
        for (int i = -5; i <= 5; ++i) dks.push_back(trust * i / 5.0);
        std::vector<double> etas, times;
        const double t_hat = nmap.period_map.evaluate({0.0});
        for (int j = 1; j <= 10; ++j) {
            etas.push_back(0.1 * j);
            times.push_back(0.1 * j * t_hat);
        }
        write_loci_csv(nmap, etas, dks, opts.params(), (out / "loci_fixed_eta.csv").string());
        write_loci_csv(tmap, times, dks, opts.params(), (out / "loci_fixed_t.csv").string());
        std::cout << "fixed-locus: 10 instants x " << dks.size() << " deviations per mode"
                  << std::endl;
        return kExitOk;
    }

    throw CLI::ValidationError("unknown experiment: " + cfg.which);
}

int cmd_control(const RunConfig& cfg) {
    const fs::path out = ensure_outdir(cfg, "control");
    PipelineOptions opts = cfg.pipeline();
    const PdConfig pd = cfg.pd();

    const ControlScenario sc = build_control_scenario(family_from_name(cfg.family), pd, opts);

    auto dump_run = [&](const ControlRun& run, const std::string& stem) {
        write_control_csv(run, (out / (stem + "_impulses.csv")).string(),
                          (out / (stem + "_trajectory.csv")).string());
        write_text_file((out / (stem + "_summary.json")).string(), control_summary_json(run, pd));
    };

    if (cfg.control_mode == "proposed") {
        const ControlRun run = simulate_pd(sc.map, sc.start, pd, opts.params());
        dump_run(run, "proposed");
        std::cout << "proposed: total dv " << run.total_dv << ", converged " << run.converged
                  << " (revolution " << run.convergence_revolution << ")" << std::endl;
        return run.escaped ? kExitNumerical : kExitOk;
    }
    if (cfg.control_mode == "tracking") {
        const OrbitMember target = member_at_kappa(sc.model, sc.start_kappa, opts);
        const ControlRun run = simulate_tracking(target, sc.start, pd, opts.params());
        dump_run(run, "tracking");
        std::cout << "tracking: total dv " << run.total_dv << ", converged " << run.converged
                  << std::endl;
        return run.escaped ? kExitNumerical : kExitOk;
    }
    if (cfg.control_mode == "compare") {
        const Comparison cmp = run_comparison(sc, pd, opts);
        dump_run(cmp.proposed, "proposed");
        dump_run(cmp.tracking, "tracking");
        json j;
        j["schema_version"] = kSchemaVersion;
        j["proposed_total_dv"] = cmp.proposed.total_dv;
        j["tracking_total_dv"] = cmp.tracking.total_dv;
        j["reduction_percent"] = cmp.reduction_percent;
        j["target_kappa"] = cmp.target.kappa;
        write_text_file((out / "comparison.json").string(), j.dump(2));
        std::cout << "comparison: proposed " << cmp.proposed.total_dv << ", tracking "
                  << cmp.tracking.total_dv << ", reduction " << cmp.reduction_percent << "%"
                  << std::endl;
        const bool ok = !cmp.proposed.escaped && !cmp.tracking.escaped;
        return ok ? kExitOk : kExitNumerical;
    }
    throw CLI::ValidationError("unknown control mode: " + cfg.control_mode);
}

} // namespace

int main(int argc, char** argv) {
    RunConfig cfg;

    // A config file supplies defaults; explicit flags win.
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                cfg.merge_json(json::parse(read_text_file(argv[i + 1])));
            } catch (const std::exception& e) {
                std::cerr << "config file error: " << e.what() << std::endl;
                return kExitUsage;
            }
        }
    }

    CLI::App app{"Periodic-orbit families near the Earth-Moon libration points as "
                 "polynomial maps: generation, fitting, propagation and station-keeping"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags win)");

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file (flags win)");
        sub->add_option("--mu", cfg.mu, "secondary mass ratio");
        sub->add_option("--out", cfg.out, "output directory (default $LUNAMAP_OUT or ./out)");
        sub->add_option("--order", cfg.order, "series truncation order");
        sub->add_option("--ns", cfg.ns, "integration steps per period");
        sub->add_option("--seed", cfg.seed, "random seed");
    };

    CLI::App* family = app.add_subcommand("family", "generate a periodic-orbit family table");
    add_common(family);
    family->add_option("--family", cfg.family, "L1-Lyap, L2-Lyap, L1-Halo or L2-Halo");
    family->add_option("--count", cfg.count, "member count");
    family->add_option("--ds", cfg.ds, "arclength step");

    CLI::App* fit = app.add_subcommand("fit", "fit a family model");
    add_common(fit);
    fit->add_option("--family", cfg.family, "family to build when no --table is given");
    fit->add_option("--table", cfg.table_file, "family table json");
    fit->add_option("--regions", cfg.regions, "region count (global model)");
    fit->add_option("--degree", cfg.degree, "polynomial degree");
    fit->add_flag("--local", cfg.local, "fit a local model instead");
    fit->add_option("--member", cfg.member, "designed member index (local)");
    fit->add_option("--window", cfg.window, "neighbour count (local)");
    fit->add_option("--count", cfg.count, "member count for auto-built tables");
    fit->add_option("--ds", cfg.ds, "arclength step for auto-built tables");

    CLI::App* map = app.add_subcommand("map", "build a propagation map from a model");
    add_common(map);
    map->add_option("--family", cfg.family, "family to build when no inputs are given");
    map->add_option("--table", cfg.table_file, "family table json");
    map->add_option("--model", cfg.model_file, "model json");
    map->add_option("--mode", cfg.mode, "time or normalized");
    map->add_option("--op-point", cfg.op_point, "expansion parameter (default: domain midpoint)");
    map->add_option("--count", cfg.count, "member count for auto-built tables");
    map->add_option("--ds", cfg.ds, "arclength step for auto-built tables");
    map->add_option("--regions", cfg.regions, "region count for auto-built models");
    map->add_option("--degree", cfg.degree, "degree for auto-built models");

    CLI::App* experiment = app.add_subcommand("experiment", "emit experiment datasets");
    add_common(experiment);
    experiment->add_option("--which", cfg.which, "hold-orbits, global-vs-local or fixed-locus");
    experiment->add_option("--family", cfg.family, "family for auto-built inputs");
    experiment->add_option("--table", cfg.table_file, "family table json");
    experiment->add_option("--model", cfg.model_file, "model json");
    experiment->add_option("--samples", cfg.samples, "sample count");
    experiment->add_option("--revs", cfg.revs, "revolutions to propagate");
    experiment->add_option("--window", cfg.window, "local window (global-vs-local)");
    experiment->add_option("--count", cfg.count, "member count for auto-built tables");
    experiment->add_option("--ds", cfg.ds, "arclength step for auto-built tables");
    experiment->add_option("--regions", cfg.regions, "region count for auto-built models");
    experiment->add_option("--degree", cfg.degree, "degree for auto-built models");
    experiment->add_flag("!--no-auto-build", cfg.auto_build, "fail when prerequisites are missing");

    CLI::App* control = app.add_subcommand("control", "run station-keeping simulations");
    add_common(control);
    control->add_option("--mode", cfg.control_mode, "proposed, tracking or compare");
    control->add_option("--family", cfg.family, "family for the scenario");
    control->add_option("--kp", cfg.kp, "proportional gain");
    control->add_option("--kd", cfg.kd, "derivative gain");
    control->add_option("--eta-t", cfg.eta_t, "normalized transfer time");
    control->add_option("--revs", cfg.control_revs, "simulated revolutions");
    control->add_option("--disturbance", cfg.disturbance, "velocity disturbance magnitude");
    control->add_option("--count", cfg.count, "member count for the scenario table");
    control->add_option("--ds", cfg.ds, "arclength step for the scenario table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        validate_common(cfg);
        if (family->parsed()) return cmd_family(cfg);
        if (fit->parsed()) return cmd_fit(cfg);
        if (map->parsed()) return cmd_map(cfg);
        if (experiment->parsed()) return cmd_experiment(cfg);
        if (control->parsed()) return cmd_control(cfg);
        std::cerr << "no subcommand given" << std::endl;
        return kExitUsage;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << std::endl;
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << std::endl;
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitNumerical;
    }
}
