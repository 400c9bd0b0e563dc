#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "tpkmp/episode.hpp"
#include "tpkmp/errors.hpp"
#include "tpkmp/impedance.hpp"
#include "tpkmp/scenario.hpp"

using namespace tpkmp;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Gains constant_gains(double k, Index o = 2, double mass = 1.0) {
  Gains g;
  g.GP = k * Mat::Identity(o, o);
  g.GD = 2.0 * std::sqrt(mass * k) * Mat::Identity(o, o);
  return g;
}

Mat random_psd(std::mt19937_64& rng, Index o, double scale) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat a(o, o);
  for (Index i = 0; i < o; ++i) {
    for (Index j = 0; j < o; ++j) a(i, j) = n(rng);
  }
  return scale * a * a.transpose();
}

struct Trained {
  Scenario sc;
  TpModel model;
};

const Trained& pick_place() {
  static const Trained t = [] {
    auto sc = generate_scenario(ScenarioKind::pick_place, 0);
    auto model = train(sc.demos, sc.train);
    return Trained{std::move(sc), std::move(model)};
  }();
  return t;
}

const Trained& extension() {
  static const Trained t = [] {
    auto sc = generate_scenario(ScenarioKind::extension, 0);
    auto model = train(sc.demos, sc.train);
    return Trained{std::move(sc), std::move(model)};
  }();
  return t;
}

// distance from p to the polyline through the desired positions
double distance_to_path(const std::vector<TraceRow>& trace, const Vec& p) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j < trace.size(); ++j) {
    const Vec a = trace[j - 1].desired;
    const Vec ab = trace[j].desired - a;
    const double l2 = ab.squaredNorm();
    const double u = l2 > 0.0 ? std::clamp((p - a).dot(ab) / l2, 0.0, 1.0) : 0.0;
    best = std::min(best, (a + u * ab - p).norm());
  }
  return best;
}

double mean_in_distribution_trace(const Trained& t) {
  const auto frames = t.sc.eval_frames.front();
  StiffnessConfig cfg;
  double sum = 0.0;
  int n = 0;
  for (double s = 0.0; s <= 1.0; s += 0.01) {
    sum += compute_gains(cfg, fused_predict(t.model, s, frames)).GP.trace();
    ++n;
  }
  return sum / n;
}

}  // namespace

TEST(Sigmoid, MidpointIsHalf) {
  StiffnessConfig cfg;
  EXPECT_EQ(sigmoid_weight(cfg, cfg.c2), 0.5);
}

TEST(Sigmoid, NoUncertaintyFavoursAleatoric) {
  StiffnessConfig cfg;
  const double expected = 1.0 / (1.0 + std::exp(7.5));
  EXPECT_NEAR(sigmoid_weight(cfg, 0.0), expected, 1e-15);
  EXPECT_NEAR(sigmoid_weight(cfg, 0.0), 5.5e-4, 1e-5);
}

TEST(Sigmoid, HighUncertaintyFavoursEpistemic) {
  StiffnessConfig cfg;
  EXPECT_GT(sigmoid_weight(cfg, 10.0 * cfg.c2), 0.99);
}

TEST(Sigmoid, MonotoneAndWeightsSumToOne) {
  StiffnessConfig cfg;
  double prev = -1.0;
  for (double s2 = 0.0; s2 < 4e-3; s2 += 1e-5) {
    const double w1 = sigmoid_weight(cfg, s2);
    EXPECT_GT(w1, prev);
    EXPECT_EQ(w1 + (1.0 - w1), 1.0);
    prev = w1;
  }
}

TEST(Gains, EqualSplitGivesRegularizedInverse) {
  StiffnessConfig cfg;
  cfg.delta_ep = 1.0;
  cfg.delta_al = 1.0;
  for (double s2 : {1e-4, 2e-3, 0.5}) {
    const Mat c = s2 * Mat::Identity(2, 2);
    const Gains g = compute_gains(cfg, c, c);
    EXPECT_LT((g.GP - Mat::Identity(2, 2) / (s2 + cfg.reg)).norm(), 1e-9 / (s2 + cfg.reg)) << s2;
  }
}

TEST(Gains, FarFromDataIsCompliant) {
  StiffnessConfig cfg;
  const Gains g = compute_gains(cfg, Mat::Identity(2, 2), 0.01 * Mat::Identity(2, 2));
  EXPECT_GT(g.w1, 1.0 - 1e-12);
  const double expected = 1e-3 / (1.0 + cfg.reg * 1e-3);
  EXPECT_NEAR(g.GP(0, 0), expected, 1e-12);
  EXPECT_NEAR(g.GP(1, 1), expected, 1e-12);
}

TEST(Gains, SymmetricPositiveAndBounded) {
  StiffnessConfig cfg;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Index o = 2 + i % 2;
    const double scale = std::pow(10.0, -8.0 + 8.0 * (i % 17) / 16.0);
    const Gains g = compute_gains(cfg, random_psd(rng, o, scale), random_psd(rng, o, scale * 10.0));
    EXPECT_EQ(g.GP, g.GP.transpose());
    EXPECT_GT(min_eigenvalue(g.GP), 0.0);
    EXPECT_LE(g.GP.trace(), o / cfg.reg * (1.0 + 1e-12));
    EXPECT_LT((g.GD * g.GD - 4.0 * g.GP).norm(), 1e-9 * g.GP.norm());
  }
}

TEST(Gains, CeilingClampsEigenvalues) {
  StiffnessConfig cfg;
  cfg.reg = 1e-6;
  const Mat tiny = 1e-9 * Mat::Identity(2, 2);
  const Gains g = compute_gains(cfg, tiny, tiny, 4.0);
  EXPECT_NEAR(max_eigenvalue(g.GP), cfg.g_max, 1e-9);
  EXPECT_LT((g.GD - 2.0 * 2.0 * std::sqrt(cfg.g_max) * Mat::Identity(2, 2)).norm(), 1e-9);
}

TEST(Gains, RawBaselineUsesTotalCovariance) {
  StiffnessConfig cfg;
  Mat c(2, 2);
  c << 0.02, 0.004, 0.004, 0.01;
  Mat reg = c;
  reg.diagonal().array() += cfg.reg;
  const Gains g = raw_gains(cfg, c, 0.5 * c);
  EXPECT_LT((g.GP - reg.inverse()).norm(), 1e-10);
}

TEST(Gains, ConfigValidation) {
  StiffnessConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.reg = 0.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  EXPECT_THROW(compute_gains(StiffnessConfig{}, Mat::Identity(2, 2), Mat::Identity(2, 2), 0.0), ValidationError);
}

TEST(Step, EquilibriumIsFixed) {
  SimState s{v2(0.3, 0.1), Vec::Zero(2), Vec::Zero(2), 0.0, 1.0};
  const SimState n = step(s, constant_gains(500.0), v2(0.3, 0.1), Vec::Zero(2), 0.005);
  EXPECT_EQ(n.pos, s.pos);
  EXPECT_EQ(n.vel, s.vel);
}

TEST(Step, CriticallyDampedStepResponse) {
  const double k = 100.0;
  const double dt = 1e-3;
  const double w = std::sqrt(k);
  const Gains g = constant_gains(k, 1);
  SimState s{Vec::Zero(1), Vec::Zero(1), Vec::Zero(1), 0.0, 1.0};
  const Vec target = Vec::Constant(1, 0.1);
  double worst = 0.0;
  double peak = 0.0;
  for (int i = 1; i <= 3000; ++i) {
    s = step(s, g, target, Vec::Zero(1), dt);
    const double t = i * dt;
    const double exact = 0.1 * (1.0 - (1.0 + w * t) * std::exp(-w * t));
    worst = std::max(worst, std::abs(s.pos(0) - exact));
    peak = std::max(peak, s.pos(0));
  }
  EXPECT_LE(peak, 0.1 * 1.01);
  EXPECT_LT(worst, 0.01 * 0.1);
}

TEST(Step, ConstantForceOffset) {
  Mat gp(2, 2);
  gp << 400.0, 50.0, 50.0, 300.0;
  Gains g;
  g.GP = gp;
  g.GD = 2.0 * sqrtm_psd(gp);
  const Vec f = v2(3.0, -2.0);
  SimState s{Vec::Zero(2), Vec::Zero(2), Vec::Zero(2), 0.0, 1.0};
  for (int i = 0; i < 20000; ++i) s = step(s, g, Vec::Zero(2), f, 0.005);
  const Vec expected = gp.inverse() * f;
  EXPECT_LT((s.pos - expected).norm(), 1e-10);
}

TEST(Step, PassiveWithoutExternalForce) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Mat gp = random_psd(rng, 2, 100.0);
    gp.diagonal().array() += 10.0;
    Gains g;
    g.GP = gp;
    g.GD = 2.0 * sqrtm_psd(gp);
    const double dt = 0.005;
    SimState s{v2(0.1, -0.2), v2(0.5, 0.3), Vec::Zero(2), 0.0, 1.0};
    const Vec target = v2(0.0, 0.05);
    double e = mechanical_energy(s, gp, target);
    for (int i = 0; i < 400; ++i) {
      s = step(s, g, target, Vec::Zero(2), dt);
      const double next = mechanical_energy(s, gp, target);
      EXPECT_LE(next, e + 1e-6 * dt);
      e = next;
    }
  }
}

TEST(Step, Errors) {
  SimState s{v2(0.0, 0.0), Vec::Zero(2), Vec::Zero(2), 0.0, 1.0};
  EXPECT_THROW(step(s, constant_gains(10.0), Vec::Zero(2), Vec::Zero(2), 0.02), ValidationError);
  EXPECT_THROW(step(s, constant_gains(10.0), Vec::Zero(3), Vec::Zero(2), 0.005), DimensionError);
  const Vec inf = v2(std::numeric_limits<double>::infinity(), 0.0);
  EXPECT_THROW(step(s, constant_gains(10.0), Vec::Zero(2), inf, 0.005), SimDiverged);
}

TEST(Wall, PenaltyOnlyWhenPenetrating) {
  VirtualWall w{v2(0.5, 0.0), v2(1.0, 0.0), 1e4};
  EXPECT_EQ(w.force(v2(0.6, 0.3)), Vec::Zero(2));
  EXPECT_EQ(w.force(v2(0.5, 0.3)), Vec::Zero(2));
  EXPECT_LT((w.force(v2(0.49, 0.3)) - v2(100.0, 0.0)).norm(), 1e-9);
}

TEST(Episode, FollowsDesiredPath) {
  const auto& t = pick_place();
  EpisodeConfig cfg;
  cfg.record = false;
  for (const auto& frames : t.sc.eval_frames) {
    const auto r = run_episode(t.model, frames, cfg);
    ASSERT_FALSE(r.error);
    ASSERT_EQ(r.trace.size(), 2000u);
    double length = 0.0;
    for (std::size_t k = 1; k < r.trace.size(); ++k) length += (r.trace[k].desired - r.trace[k - 1].desired).norm();
    double worst = 0.0;
    for (std::size_t k = 0; k < r.trace.size(); k += 5) worst = std::max(worst, distance_to_path(r.trace, r.trace[k].actual));
    EXPECT_LT(worst, 0.01 * length);
    EXPECT_TRUE(r.via_points.empty());
  }
}

TEST(Episode, WeightContinuity) {
  const auto& t = extension();
  EpisodeConfig cfg;
  cfg.record = false;
  cfg.s_end = 1.3;
  const auto r = run_episode(t.model, t.sc.correction_frames, cfg);
  for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_LT(std::abs(r.trace[k].w1 - r.trace[k - 1].w1), 0.2) << k;
}

TEST(Episode, CompliantBeyondData) {
  const auto& t = extension();
  const auto& frames = t.sc.correction_frames;
  const double in_dist = mean_in_distribution_trace(t);
  const auto f = fused_predict(t.model, 1.2, frames);
  const Gains g = compute_gains(t.sc.stiffness, f);
  const Gains raw = raw_gains(t.sc.stiffness, f.cov, f.cov_ep);
  EXPECT_LE(g.GP.trace(), 0.05 * in_dist);
  EXPECT_GE(raw.GP.trace(), 10.0 * g.GP.trace());

  EpisodeConfig cfg;
  cfg.record = false;
  cfg.s_end = 1.3;
  const auto r = run_episode(t.model, frames, cfg);
  for (const auto& row : r.trace) {
    if (row.sigma2_ep >= 10.0 * t.sc.stiffness.c2) {
      EXPECT_LE(row.trace_gp, 0.05 * in_dist) << row.s;
    }
  }
}

TEST(Episode, WallForceLowerWithUncertaintyGains) {
  const auto& t = extension();
  const auto& frames = t.sc.correction_frames;
  ScriptedWall w;
  w.s0 = 1.0;
  w.wall.point = frames[1].origin() - v2(0.5 * t.sc.box.inner_width, 0.0);
  w.wall.normal = v2(1.0, 0.0);
  EpisodeScript script;
  script.walls = {w};
  double peak[2] = {0.0, 0.0};
  for (int m = 0; m < 2; ++m) {
    EpisodeConfig cfg;
    cfg.record = false;
    cfg.s_end = 1.3;
    cfg.gains = m == 0 ? GainMode::uncertainty : GainMode::raw;
    const auto r = run_episode(t.model, frames, cfg, script);
    for (const auto& row : r.trace) {
      if (row.s > 1.0) peak[m] = std::max(peak[m], row.contact.norm());
    }
  }
  EXPECT_GT(peak[1], 1.0);
  EXPECT_LT(peak[0], 0.2 * peak[1]);
}

TEST(Episode, DragBeyondDataAddsViaPoints) {
  const auto& t = extension();
  const auto& frames = t.sc.correction_frames;
  const Vec b2 = frames[1].origin();
  DragSegment d;
  d.s0 = 1.05;
  d.s1 = 1.25;
  d.waypoints = {{1.05, b2}, {1.25, b2 + v2(0.0, 0.2)}};
  EpisodeScript script;
  script.drags = {d};
  EpisodeConfig cfg;
  cfg.trigger = t.sc.trigger;
  cfg.s_end = 1.3;
  const auto r = run_episode(t.model, frames, cfg, script);
  ASSERT_FALSE(r.via_points.empty());
  EXPECT_GT(r.model.s_max, 1.0);
  const double diam = t.sc.workspace_diameter();
  for (const auto& vp : r.via_points) {
    EXPECT_GT(vp.s, 1.0);
    EXPECT_EQ(vp.source, ViaSource::distance);
    EXPECT_EQ(vp.frame_index, 1u);
    const auto f = fused_predict(r.model, vp.s, frames);
    EXPECT_LT((f.mean - vp.mu).norm(), 1e-3 * diam) << vp.s;
  }
}

TEST(Episode, LiveForceAndButton) {
  const auto& t = pick_place();
  EpisodeConfig cfg;
  cfg.trigger.mode = TriggerMode::button;
  cfg.s_end = 0.1;
  EpisodeRunner run(t.model, t.sc.eval_frames.front(), cfg);
  const Vec push = v2(0.0, 30.0);
  run.advance();
  const auto& row = run.advance(&push, true);
  EXPECT_EQ(row.force, push);
  EXPECT_EQ(run.recorder().pending().size(), 1u);
  EXPECT_EQ(run.recorder().pending().front().source, ViaSource::button);
  while (!run.done()) run.advance();
  EXPECT_THROW(run.advance(), ContractViolation);
  const auto r = run.finish();
  EXPECT_EQ(r.via_points.size(), 1u);
  std::size_t total = 0;
  for (const auto& l : r.model.locals) total += l.via_points.size();
  EXPECT_EQ(total, 1u);
}

TEST(Episode, ScriptedButtonAndFrameMove) {
  const auto& t = pick_place();
  EpisodeConfig cfg;
  cfg.trigger.mode = TriggerMode::button;
  cfg.s_end = 0.5;
  EpisodeScript script;
  script.buttons = {0.25};
  const auto frames = t.sc.eval_frames.front();
  const FramePose moved(frames[1].origin() + v2(0.1, 0.0), Mat::Identity(2, 2));
  script.frame_moves = {FrameMove{0.3, 1, moved}};
  EpisodeRunner run(t.model, frames, cfg, script);
  while (!run.done()) run.advance();
  EXPECT_EQ(run.frames()[1].origin(), moved.origin());
  const auto r = run.finish();
  ASSERT_EQ(r.via_points.size(), 1u);
  EXPECT_NEAR(r.via_points[0].s, 0.25, 1e-3);
  const auto& last = r.trace.back();
  std::vector<FramePose> now{frames[0], moved};
  EXPECT_LT((fused_predict(t.model, last.s, now).mean - last.desired).norm(), 1e-9);
}

TEST(Episode, PrecomputedTableMatches) {
  const auto& t = pick_place();
  EpisodeConfig cfg;
  cfg.record = false;
  cfg.s_end = 0.3;
  const auto frames = t.sc.eval_frames.front();
  auto table = local_predictions(t.model, episode_grid(t.model, cfg));
  EpisodeRunner a(t.model, std::move(table), frames, cfg);
  EpisodeRunner b(t.model, frames, cfg);
  while (!a.done()) {
    a.advance();
    b.advance();
  }
  EXPECT_EQ(a.state().pos, b.state().pos);
  EXPECT_THROW(EpisodeRunner(t.model, std::vector<std::vector<Prediction>>(2), frames, cfg), DimensionError);
}

TEST(Episode, DivergenceKeepsPartialTrace) {
  const auto& t = pick_place();
  DragSegment d;
  d.s0 = 0.05;
  d.s1 = 0.2;
  d.stiffness = 1e9;
  d.waypoints = {{0.0, v2(0.5, 0.5)}};
  EpisodeScript script;
  script.drags = {d};
  EpisodeConfig cfg;
  cfg.record = false;
  cfg.s_end = 0.2;
  const auto r = run_episode(t.model, t.sc.eval_frames.front(), cfg, script);
  ASSERT_TRUE(r.error);
  EXPECT_GT(r.trace.size(), 50u);
  EXPECT_LT(r.trace.size(), 400u);
}

TEST(Episode, TraceCsv) {
  const auto& t = pick_place();
  EpisodeConfig cfg;
  cfg.record = false;
  cfg.s_end = 0.01;
  const auto r = run_episode(t.model, t.sc.eval_frames.front(), cfg);
  std::ostringstream out;
  write_trace_csv(out, r.trace);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t,s,desired_1,desired_2,actual_1,actual_2,F_1,F_2,trace_GP,sigma2_ep,w1");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 10);
    ++rows;
  }
  EXPECT_EQ(rows, static_cast<int>(r.trace.size()));
}

TEST(Scenario, PickPlaceDemos) {
  const auto sc = generate_scenario(ScenarioKind::pick_place, 0);
  ASSERT_EQ(sc.demos.size(), 4u);
  for (const auto& d : sc.demos) {
    EXPECT_NO_THROW(d.validate());
    ASSERT_EQ(d.frames.size(), 2u);
    EXPECT_EQ(d.frames[0].origin()(1), 0.0);
    EXPECT_EQ(d.frames[1].origin()(1), 0.0);
  }
  EXPECT_NE(sc.demos[0].frames[1].origin()(0), sc.demos[1].frames[1].origin()(0));
  const auto again = generate_scenario(ScenarioKind::pick_place, 0);
  EXPECT_EQ(again.demos[2].outputs, sc.demos[2].outputs);
  const auto other = generate_scenario(ScenarioKind::pick_place, 1);
  EXPECT_NE(other.demos[2].outputs, sc.demos[2].outputs);
}

TEST(Scenario, HeightGeneralizationGrid) {
  const auto sc = generate_scenario(ScenarioKind::height_generalization, 0);
  ASSERT_EQ(sc.eval_frames.size(), 15u);
  std::set<double> heights;
  for (const auto& f : sc.eval_frames) heights.insert(f[1].origin()(1));
  EXPECT_EQ(heights.size(), 3u);
  EXPECT_EQ(sc.trigger.mode, TriggerMode::force);
  EXPECT_EQ(sc.trigger.gamma_F, 20.0);
}

TEST(Scenario, ExtensionAndNewFrame) {
  const auto ext = generate_scenario(ScenarioKind::extension, 0);
  EXPECT_DOUBLE_EQ(ext.s_end, 1.3);
  EXPECT_EQ(ext.trigger.mode, TriggerMode::distance);
  const auto nf = generate_scenario(ScenarioKind::new_frame, 0);
  EXPECT_EQ(nf.eval_frames.size(), 5u);
  EXPECT_EQ(nf.correction_frames.size(), 3u);
  EXPECT_EQ(scenario_kind_from_string(to_string(ScenarioKind::new_frame)), ScenarioKind::new_frame);
  EXPECT_THROW(scenario_kind_from_string("stack"), ValidationError);
}

TEST(Scenario, BoxCollision) {
  BoxGeometry box;
  const FramePose b(v2(0.5, 0.0), Mat::Identity(2, 2));
  EXPECT_FALSE(box_collision(box, b, v2(0.5, 0.0)));
  EXPECT_TRUE(box_collision(box, b, v2(0.5, -0.045)));
  EXPECT_TRUE(box_collision(box, b, v2(0.555, 0.05)));
  EXPECT_FALSE(box_collision(box, b, v2(0.555, 0.13)));
  EXPECT_FALSE(box_collision(box, b, v2(0.7, 0.0)));
  EXPECT_FALSE(box_collision(box, b, v2(0.5, -0.06)));
}

TEST(Scenario, ShapeHitsWaypoints) {
  PickPlaceShape shape;
  const Vec b1 = v2(0.2, 0.0);
  const Vec b2 = v2(0.7, -0.1);
  EXPECT_LT((shape.at(b1, b2, 0.0) - b1).norm(), 1e-15);
  EXPECT_LT((shape.at(b1, b2, shape.t_up) - (b1 + v2(0.0, shape.lift))).norm(), 1e-15);
  EXPECT_LT((shape.at(b1, b2, shape.t_down) - (b2 + v2(0.0, shape.lift))).norm(), 1e-15);
  EXPECT_LT((shape.at(b1, b2, 1.0) - b2).norm(), 1e-15);
}
