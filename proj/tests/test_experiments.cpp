#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "tpkmp/errors.hpp"
#include "tpkmp/experiments.hpp"

using namespace tpkmp;
namespace fs = std::filesystem;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

const Scenario& pick_place() {
  static const Scenario sc = generate_scenario(ScenarioKind::pick_place, 0);
  return sc;
}

const TpModel& pick_place_model() {
  static const TpModel m = train(pick_place().demos, pick_place().train);
  return m;
}

const ExperimentReport& exp2_report() {
  static const ExperimentReport r = replay_experiment(ExperimentKind::exp2, 0);
  return r;
}

}  // namespace

TEST(GmrTable, MatchesGmrAndHasNoEpistemicPart) {
  const auto& sc = pick_place();
  const auto mixtures = fit_local_mixtures(sc.demos, sc.train);
  const auto q = make_inputs(21, 1.0);
  const auto table = gmr_table(mixtures, q);
  ASSERT_EQ(table.size(), 2u);
  const auto ref = gmr(mixtures[1], q);
  for (std::size_t i = 0; i < q.size(); ++i) {
    EXPECT_EQ(table[1][i].mean, ref.entries[i].mu);
    EXPECT_EQ(table[1][i].cov, table[1][i].cov_al);
    EXPECT_EQ(table[1][i].cov_ep.norm(), 0.0);
  }
}

TEST(Benchmark, OrderingOnOutOfRangeFrames) {
  const auto r = bench_pick_place(pick_place(), pick_place_model(), 12, 3);
  const double diam = r.workspace_diameter;
  const auto& vp = r.at("tp_kmp_viapoints");
  EXPECT_LE(MethodStats::mean(vp.start), 1e-3 * diam);
  EXPECT_LE(MethodStats::mean(vp.end), 1e-3 * diam);
  EXPECT_GT(MethodStats::mean(r.at("gmr_single").start), MethodStats::mean(r.at("tp_gmr").start));
  EXPECT_GE(MethodStats::mean(r.at("tp_gmr").start), 100.0 * MethodStats::mean(vp.start));
  EXPECT_THROW(r.at("promp"), ValidationError);

  const auto again = bench_pick_place(pick_place(), pick_place_model(), 12, 3);
  EXPECT_EQ(to_json(again).dump(), to_json(r).dump());
  EXPECT_NE(to_markdown(r).find("| tp_gmr |"), std::string::npos);
}

TEST(Benchmark, StatsHelpers) {
  EXPECT_DOUBLE_EQ(MethodStats::mean({1.0, 2.0, 3.0}), 2.0);
  EXPECT_DOUBLE_EQ(MethodStats::stddev({1.0, 2.0, 3.0}), 1.0);
  EXPECT_EQ(MethodStats::stddev({4.0}), 0.0);
}

TEST(Experiments, KindNames) {
  for (auto k : {ExperimentKind::exp1, ExperimentKind::exp2, ExperimentKind::exp3}) {
    EXPECT_EQ(experiment_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(experiment_kind_from_string("exp4"), ValidationError);
  EXPECT_EQ(scenario_for(ExperimentKind::exp3), ScenarioKind::extension);
}

TEST(Experiments, WrongScenarioRejected) {
  EXPECT_THROW(replay_experiment(ExperimentKind::exp1, pick_place(), pick_place_model()), ValidationError);
}

TEST(Experiments, FirstCollision) {
  const auto& sc = pick_place();
  const std::vector<FramePose> fr = sc.correction_frames;
  std::vector<TraceRow> trace(3);
  trace[0].s = 0.0;
  trace[0].actual = fr[0].origin() + v2(0.0, 0.3);
  trace[1].s = 0.5;
  trace[1].actual = fr[1].origin() + v2(0.5 * sc.box.inner_width + 0.005, 0.0);
  trace[2].s = 1.0;
  trace[2].actual = fr[1].origin();
  const auto hit = first_collision(sc, fr, trace);
  ASSERT_TRUE(hit);
  EXPECT_EQ(*hit, 0.5);
  trace.erase(trace.begin() + 1);
  EXPECT_FALSE(first_collision(sc, fr, trace));
}

TEST(Experiments, CorrectionScripts) {
  const auto sc1 = generate_scenario(ScenarioKind::height_generalization, 0);
  const auto s1 = correction_script(ExperimentKind::exp1, sc1);
  ASSERT_EQ(s1.drags.size(), 1u);
  EXPECT_EQ(s1.drags[0].s0, 0.0);
  EXPECT_TRUE(s1.drags[0].target(0.0).isApprox(sc1.correction_frames[0].origin()));
  EXPECT_EQ(correction_config(ExperimentKind::exp1, sc1).start, sc1.correction_frames[0].origin());

  const auto sc2 = generate_scenario(ScenarioKind::new_frame, 0);
  const auto s2 = correction_script(ExperimentKind::exp2, sc2);
  EXPECT_EQ(s2.buttons.size(), 3u);
  EXPECT_TRUE(s2.drags[0].target(0.5).isApprox(sc2.correction_frames[2].origin()));

  const auto sc3 = generate_scenario(ScenarioKind::extension, 0);
  const auto s3 = correction_script(ExperimentKind::exp3, sc3);
  EXPECT_GT(s3.drags[0].s0, 1.0);
}

TEST(Experiments, NewFrameViaPointsGoToCamera) {
  const auto& r = exp2_report();
  EXPECT_EQ(r.via_points.size(), 3u);
  for (const auto& vp : r.via_points) EXPECT_EQ(vp.frame_index, 2u);
  EXPECT_EQ(r.corrected.size(), 3u);
  EXPECT_EQ(r.configs.size(), 5u);
  EXPECT_LT(r.summary.at("camera_max_variance_at_via_points").get<double>(), 1e-6);
  EXPECT_LE(r.summary.at("placeholder_max_relative_change").get<double>(), 1e-2);
}

TEST(Experiments, NewFramePassesNearViaPointsOnUnseenCameraPoses) {
  const auto& r = exp2_report();
  for (const auto& c : r.configs) EXPECT_LE(c.value, 1e-3) << "camera pose " << c.index;
}

TEST(Experiments, ReportFiles) {
  const fs::path dir = fs::temp_directory_path() / ("tpkmp_report_" + std::to_string(std::random_device{}()));
  const auto& r = exp2_report();
  write_report(dir, r);
  EXPECT_TRUE(fs::exists(dir / "report.md"));
  EXPECT_TRUE(fs::exists(dir / "traces" / "correction.csv"));
  EXPECT_TRUE(fs::exists(dir / "traces" / "tp_kmp_corrected_4.csv"));
  const Json j = read_json(dir / "report.json");
  EXPECT_EQ(j.at("config_hash"), r.config_hash);
  EXPECT_EQ(j.at("experiment"), "exp2");
  EXPECT_EQ(dump_model(load_model(dir / "corrected_model.json")), dump_model(r.corrected));
  fs::remove_all(dir);
}
