#pragma once

#include <string>
#include <vector>

#include "lunamap/control.hpp"
#include "lunamap/family.hpp"
#include "lunamap/flowmap.hpp"
#include "lunamap/regress.hpp"

namespace lunamap {

// Bumped on any incompatible layout change; readers reject other versions.
inline constexpr int kSchemaVersion = 1;

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Family tables: CSV for plotting plus a JSON twin that round-trips exactly.
void write_family_csv(const FamilyTable& table, const std::string& path);
std::string family_table_to_json(const FamilyTable& table);
FamilyTable family_table_from_json(const std::string& text);

std::string global_model_to_json(const GlobalModel& model);
GlobalModel global_model_from_json(const std::string& text);

std::string local_model_to_json(const LocalModel& model);
LocalModel local_model_from_json(const std::string& text);

// Impulse log (t, pre-burn state, dv, |dv|, kappa0, eta0) and the sampled
// trajectory, as separate CSV files.
void write_control_csv(const ControlRun& run, const std::string& impulses_path,
                       const std::string& trajectory_path);
std::string control_summary_json(const ControlRun& run, const PdConfig& cfg);

// Family loci at fixed instants for plotting: one row per (instant, dkappa).
void write_loci_csv(const FlowMap& map, const std::vector<double>& instants,
                    const std::vector<double>& dkappas, const SystemParams& p,
                    const std::string& path);

} // namespace lunamap
