#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tpkmp/episode.hpp"
#include "tpkmp/io.hpp"
#include "tpkmp/scenario.hpp"

namespace tpkmp {

/// Local GMR table over `queries` for one mixture per frame, as predictions with
/// zero epistemic part (cov = cov_al = GMR covariance).
std::vector<std::vector<Prediction>> gmr_table(const std::vector<GaussianMixture>& mixtures,
                                               std::span<const double> queries, Exec exec = Exec::parallel);

struct MethodStats {
  std::string method;
  std::vector<double> start;    // |xi(0) - start frame origin| per run
  std::vector<double> end;      // |xi(1) - goal frame origin| per run
  std::vector<double> average;  // mean pointwise distance to the run's reference shape

  static double mean(const std::vector<double>& v);
  static double stddev(const std::vector<double>& v);
};

struct BenchmarkReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  int runs = 0;
  double workspace_diameter = 0.0;
  std::vector<MethodStats> methods;  // gmr_single, tp_gmr, tp_kmp, tp_kmp_viapoints

  const MethodStats& at(const std::string& method) const;
};

/// Open-loop comparison on R random frame placements outside the demonstrated
/// range (box heights never varied in the demos). `model` is the trained TP-KMP.
BenchmarkReport bench_pick_place(const Scenario& sc, const TpModel& model, int runs, std::uint64_t seed);

Json to_json(const BenchmarkReport& r);
std::string to_markdown(const BenchmarkReport& r);

enum class ExperimentKind { exp1, exp2, exp3 };
std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& name);
ScenarioKind scenario_for(ExperimentKind k);

struct ConfigResult {
  std::string method;
  std::size_t index = 0;
  std::vector<FramePose> frames;
  bool pass = false;
  double value = 0.0;  // collision s (exp1) or worst via-point error (exp2)
  std::vector<TraceRow> trace;
};

struct ExperimentReport {
  ExperimentKind kind = ExperimentKind::exp1;
  std::string config_hash;
  std::uint64_t seed = 0;
  Json summary;
  std::vector<ConfigResult> configs;
  std::vector<ViaPoint> via_points;  // created by the correction pass
  TpModel corrected;
  std::vector<TraceRow> correction_trace;
};

/// Scripted correction pass on the scenario's correction configuration, then the
/// held-out evaluation. `model` is the uncorrected TP-KMP trained on `sc`.
ExperimentReport replay_experiment(ExperimentKind kind, const Scenario& sc, const TpModel& model);
ExperimentReport replay_experiment(ExperimentKind kind, std::uint64_t seed);

/// Correction script of each experiment on its scenario.
EpisodeScript correction_script(ExperimentKind kind, const Scenario& sc);
EpisodeConfig correction_config(ExperimentKind kind, const Scenario& sc);

/// True when any executed position enters a box at one of the first two frames.
std::optional<double> first_collision(const Scenario& sc, const std::vector<FramePose>& frames,
                                      const std::vector<TraceRow>& trace);

Json to_json(const ExperimentReport& r);
std::string to_markdown(const ExperimentReport& r);

/// Writes report.json, report.md and one trace CSV per configuration into `dir`.
void write_report(const std::filesystem::path& dir, const ExperimentReport& r);
void write_report(const std::filesystem::path& dir, const BenchmarkReport& r);

}  // namespace tpkmp
