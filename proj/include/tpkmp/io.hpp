#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "json.hpp"
#include "tpkmp/episode.hpp"
#include "tpkmp/scenario.hpp"
#include "tpkmp/tp_model.hpp"

namespace tpkmp {

using Json = nlohmann::json;

/// Reads `s,x1..xO` CSV rows. Line numbers in ParseError count the header as line 1.
Demonstration parse_demo_csv(std::istream& in);

/// CSV at `path` plus the sidecar `<path without extension>.json` holding
/// {"duration_s": T} and optionally "frames": [{"b": [...], "A": [[...]]}].
Demonstration ingest_demo(const std::filesystem::path& path);

/// Writes the CSV and its sidecar.
void write_demo(const std::filesystem::path& path, const Demonstration& demo);

Json to_json(const Vec& v);
Json to_json(const Mat& m);
Json to_json(const FramePose& f);
Vec vec_from_json(const Json& j);
Mat mat_from_json(const Json& j);
FramePose frame_from_json(const Json& j);

Json to_json(const KernelConfig& k);
Json to_json(const KmpHyper& h);
Json to_json(const TriggerConfig& c);
Json to_json(const StiffnessConfig& c);
Json to_json(const EpisodeConfig& c);
Json to_json(const TrainConfig& c);
KernelConfig kernel_from_json(const Json& j);
KmpHyper hyper_from_json(const Json& j);
TriggerConfig trigger_from_json(const Json& j, TriggerConfig base = {});
StiffnessConfig stiffness_from_json(const Json& j, StiffnessConfig base = {});
EpisodeConfig episode_config_from_json(const Json& j, EpisodeConfig base = {});
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});

Json to_json(const ViaPoint& vp);
ViaPoint via_point_from_json(const Json& j);

/// Model persistence. Doubles are written in shortest round-trip form, so
/// load(save(m)) reproduces every stored number exactly.
Json model_to_json(const TpModel& model);
TpModel model_from_json(const Json& j);
std::string dump_model(const TpModel& model);
void save_model(const std::filesystem::path& path, const TpModel& model);
TpModel load_model(const std::filesystem::path& path);

/// Scenario description. With `embed_demos` the demonstrations are inlined,
/// otherwise they are referenced by file name relative to the scenario file.
Json scenario_to_json(const Scenario& sc, bool embed_demos = true);

/// Accepts either {"kind", "seed"} (generated, remaining fields override the
/// generated ones) or a full description with "demos" as inline objects or
/// CSV file names resolved against `base_dir`.
Scenario scenario_from_json(const Json& j, const std::filesystem::path& base_dir = {});

/// Writes scenario.json plus one CSV/sidecar pair per demonstration into `dir`.
std::filesystem::path write_scenario(const std::filesystem::path& dir, const Scenario& sc);
Scenario load_scenario(const std::filesystem::path& file);

std::uint64_t fnv1a64(std::string_view data);
/// FNV-1a of the scenario's canonical JSON (demonstrations inlined), as 16 hex digits.
std::string config_hash(const Scenario& sc);

Json to_json(const TraceRow& row);
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace tpkmp
