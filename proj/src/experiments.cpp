#include "tpkmp/experiments.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "tpkmp/errors.hpp"

namespace tpkmp {

namespace fs = std::filesystem;

namespace {

Vec xz(double x, double z) {
  Vec v(2);
  v << x, z;
  return v;
}

constexpr double kViaSigma = 1e-8;
constexpr double kPlaceholderVariance = 1e4;

std::vector<Vec> means(const std::vector<FusedPrediction>& f) {
  std::vector<Vec> out;
  out.reserve(f.size());
  for (const auto& p : f) out.push_back(p.mean);
  return out;
}

EpisodeConfig eval_config(const Scenario& sc) {
  EpisodeConfig c;
  c.stiffness = sc.stiffness;
  c.trigger = sc.trigger;
  c.duration_scale = sc.duration_scale;
  c.rate_hz = sc.rate_hz;
  c.s_end = sc.s_end;
  c.record = false;
  return c;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream o;
  o.precision(prec);
  o << v;
  return o.str();
}

}  // namespace

std::vector<std::vector<Prediction>> gmr_table(const std::vector<GaussianMixture>& mixtures,
                                               std::span<const double> queries, Exec exec) {
  std::vector<std::vector<Prediction>> table;
  for (const auto& m : mixtures) {
    const auto ref = gmr(m, queries, exec);
    std::vector<Prediction> col;
    col.reserve(ref.entries.size());
    for (const auto& e : ref.entries) {
      const Index o = e.mu.size();
      col.push_back(Prediction{e.mu, e.sigma, Mat::Zero(o, o), e.sigma});
    }
    table.push_back(std::move(col));
  }
  return table;
}

double MethodStats::mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double MethodStats::stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

const MethodStats& BenchmarkReport::at(const std::string& method) const {
  for (const auto& m : methods) {
    if (m.method == method) return m;
  }
  throw ValidationError("no method '" + method + "' in report");
}

BenchmarkReport bench_pick_place(const Scenario& sc, const TpModel& model, int runs, std::uint64_t seed) {
  if (runs < 1) throw ValidationError("runs must be >= 1");
  if (model.size() != 2) throw ValidationError("pick-place benchmark needs a two-frame model");
  const auto grid = make_inputs(201, 1.0);

  // gmr_single: one mixture on the raw global samples, blind to the frames
  std::vector<Demonstration> global = sc.demos;
  for (auto& d : global) d.frames = {FramePose::identity(d.output_dim())};
  const auto single = fit_gmm(global, sc.train.components, sc.train.seed, sc.train.em).mixture;
  std::vector<Vec> single_mean;
  for (const auto& e : gmr(single, grid).entries) single_mean.push_back(e.mu);

  const auto tp_gmr = gmr_table(fit_local_mixtures(sc.demos, sc.train), grid);
  const auto tp_kmp = local_predictions(model, grid);

  // A via-point at a frame's own origin is the zero vector in that frame for
  // every placement, so the corrected model is shared by all runs.
  TpModel vp_model = model;
  const auto demo_frames = model.frames();
  const Index o = model.output_dim();
  insert_correction(vp_model, ViaPoint{0.0, demo_frames[0].origin(), kViaSigma * Mat::Identity(o, o), std::nullopt, ViaSource::manual}, demo_frames, 0,
                    false);
  insert_correction(vp_model, ViaPoint{1.0, demo_frames[1].origin(), kViaSigma * Mat::Identity(o, o), std::nullopt, ViaSource::manual}, demo_frames, 1,
                    false);
  rebuild_stale(vp_model);
  const auto tp_kmp_vp = local_predictions(vp_model, grid);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> x1(0.05, 0.35), x2(0.55, 0.85), dz(0.05, 0.15);
  std::bernoulli_distribution up(0.5);
  std::vector<std::vector<FramePose>> placements;
  for (int r = 0; r < runs; ++r) {
    const double a = x1(rng), za = (up(rng) ? 1.0 : -1.0) * dz(rng);
    const double b = x2(rng), zb = (up(rng) ? 1.0 : -1.0) * dz(rng);
    placements.push_back({FramePose(xz(a, za), Mat::Identity(2, 2)), FramePose(xz(b, zb), Mat::Identity(2, 2))});
  }

  BenchmarkReport rep;
  rep.config_hash = config_hash(sc);
  rep.seed = seed;
  rep.runs = runs;
  rep.workspace_diameter = sc.workspace_diameter();
  for (const char* name : {"gmr_single", "tp_gmr", "tp_kmp", "tp_kmp_viapoints"}) rep.methods.push_back({name, {}, {}, {}});
  for (auto& m : rep.methods) {
    m.start.resize(static_cast<std::size_t>(runs));
    m.end.resize(static_cast<std::size_t>(runs));
    m.average.resize(static_cast<std::size_t>(runs));
  }

#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < runs; ++r) {
    const auto& fr = placements[static_cast<std::size_t>(r)];
    const Vec b1 = fr[0].origin();
    const Vec b2 = fr[1].origin();
    const std::vector<Vec> traj[4] = {single_mean, means(fuse_table(model, tp_gmr, fr, Exec::serial)),
                                      means(fuse_table(model, tp_kmp, fr, Exec::serial)),
                                      means(fuse_table(vp_model, tp_kmp_vp, fr, Exec::serial))};
    for (std::size_t m = 0; m < 4; ++m) {
      const auto& t = traj[m];
      double avg = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i) avg += (t[i] - sc.shape.at(b1, b2, grid[i])).norm();
      auto& st = rep.methods[m];
      st.start[static_cast<std::size_t>(r)] = (t.front() - b1).norm();
      st.end[static_cast<std::size_t>(r)] = (t.back() - b2).norm();
      st.average[static_cast<std::size_t>(r)] = avg / static_cast<double>(grid.size());
    }
  }
  return rep;
}

Json to_json(const BenchmarkReport& r) {
  Json methods = Json::array();
  for (const auto& m : r.methods) {
    methods.push_back(Json{{"method", m.method},
                           {"start_mean", MethodStats::mean(m.start)},
                           {"start_std", MethodStats::stddev(m.start)},
                           {"end_mean", MethodStats::mean(m.end)},
                           {"end_std", MethodStats::stddev(m.end)},
                           {"average_mean", MethodStats::mean(m.average)},
                           {"average_std", MethodStats::stddev(m.average)},
                           {"start", m.start},
                           {"end", m.end},
                           {"average", m.average}});
  }
  return Json{{"config_hash", r.config_hash},
              {"seed", r.seed},
              {"runs", r.runs},
              {"workspace_diameter", r.workspace_diameter},
              {"average_metric", "mean pointwise distance to the demonstrated shape placed at the run's frames"},
              {"methods", methods}};
}

std::string to_markdown(const BenchmarkReport& r) {
  std::ostringstream o;
  o << "# pick-place benchmark\n\n";
  o << "config hash `" << r.config_hash << "`, seed " << r.seed << ", " << r.runs
    << " runs, workspace diameter " << fmt(r.workspace_diameter) << " m\n\n";
  o << "Distances in m, mean ± std. Average is the mean pointwise distance to the demonstrated shape "
       "placed at each run's frames.\n\n";
  o << "| Method | Start | End | Average |\n|---|---|---|---|\n";
  for (const auto& m : r.methods) {
    o << "| " << m.method << " | " << fmt(MethodStats::mean(m.start)) << " ± " << fmt(MethodStats::stddev(m.start))
      << " | " << fmt(MethodStats::mean(m.end)) << " ± " << fmt(MethodStats::stddev(m.end)) << " | "
      << fmt(MethodStats::mean(m.average)) << " ± " << fmt(MethodStats::stddev(m.average)) << " |\n";
  }
  return o.str();
}

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::exp1: return "exp1";
    case ExperimentKind::exp2: return "exp2";
    case ExperimentKind::exp3: return "exp3";
  }
  return "exp1";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  if (name == "exp1") return ExperimentKind::exp1;
  if (name == "exp2") return ExperimentKind::exp2;
  if (name == "exp3") return ExperimentKind::exp3;
  throw ValidationError("unknown experiment '" + name + "'");
}

ScenarioKind scenario_for(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::exp1: return ScenarioKind::height_generalization;
    case ExperimentKind::exp2: return ScenarioKind::new_frame;
    case ExperimentKind::exp3: return ScenarioKind::extension;
  }
  return ScenarioKind::height_generalization;
}

EpisodeConfig correction_config(ExperimentKind kind, const Scenario& sc) {
  EpisodeConfig c = eval_config(sc);
  c.record = true;
  if (kind == ExperimentKind::exp1) {
    c.start = sc.correction_frames[0].origin();
    c.trigger.debounce = 0.0;  // one via-point per triggered control step
  }
  return c;
}

EpisodeScript correction_script(ExperimentKind kind, const Scenario& sc) {
  const auto& cf = sc.correction_frames;
  const Vec b1 = cf[0].origin();
  const Vec b2 = cf[1].origin();
  EpisodeScript script;
  switch (kind) {
    case ExperimentKind::exp1: {
      // guide the first part of the motion along the demonstrated shape
      DragSegment d;
      d.s0 = 0.0;
      d.s1 = 0.45;
      d.stiffness = 1e4;
      d.damping = 2.0 * std::sqrt(d.stiffness);
      for (int i = 0; i <= 100; ++i) {
        const double s = d.s1 * i / 100.0;
        d.waypoints.emplace_back(s, sc.shape.at(b1, b2, s));
      }
      script.drags = {d};
      break;
    }
    case ExperimentKind::exp2: {
      // pull through the camera origin and mark three via-points there
      const Vec cam = cf.at(2).origin();
      DragSegment d;
      d.s0 = 0.38;
      d.s1 = 0.62;
      d.stiffness = 1e4;
      d.damping = 2.0 * std::sqrt(d.stiffness);
      d.waypoints = {{0.38, sc.shape.at(b1, b2, 0.38)}, {0.44, cam}, {0.56, cam}, {0.62, sc.shape.at(b1, b2, 0.62)}};
      script.drags = {d};
      script.buttons = {0.45, 0.5, 0.55};
      break;
    }
    case ExperimentKind::exp3: {
      // lift the object out of box 2 after the demonstrated motion has ended
      DragSegment d;
      d.s0 = 1.05;
      d.s1 = 1.25;
      d.waypoints = {{1.05, b2}, {1.25, b2 + xz(0.0, 0.2)}};
      script.drags = {d};
      break;
    }
  }
  return script;
}

std::optional<double> first_collision(const Scenario& sc, const std::vector<FramePose>& frames,
                                      const std::vector<TraceRow>& trace) {
  const std::size_t boxes = std::min<std::size_t>(2, frames.size());
  for (const auto& row : trace) {
    for (std::size_t b = 0; b < boxes; ++b) {
      if (box_collision(sc.box, frames[b], row.actual)) return row.s;
    }
  }
  return std::nullopt;
}

namespace {

void run_exp1(const Scenario& sc, const TpModel& model, ExperimentReport& rep) {
  EpisodeConfig cfg = eval_config(sc);
  const auto grid = episode_grid(model, cfg);
  const auto baseline = gmr_table(fit_local_mixtures(sc.demos, sc.train), grid);

  const auto evaluate = [&](const std::string& method, const TpModel& m,
                            const std::vector<std::vector<Prediction>>& table) {
    int pass = 0;
    for (std::size_t i = 0; i < sc.eval_frames.size(); ++i) {
      const auto& fr = sc.eval_frames[i];
      EpisodeConfig c = cfg;
      c.start = fr[0].origin();
      EpisodeRunner run(m, table, fr, c);
      std::optional<std::string> err;
      try {
        while (!run.done()) run.advance();
      } catch (const SimDiverged& e) {
        err = e.what();
      }
      const auto hit = first_collision(sc, fr, run.trace());
      ConfigResult r{method, i, fr, !hit && !err, hit.value_or(-1.0), run.trace()};
      pass += r.pass;
      rep.configs.push_back(std::move(r));
    }
    return pass;
  };

  const int n = static_cast<int>(sc.eval_frames.size());
  const int base_pass = evaluate("tp_gmr", model, baseline);
  const int before_pass = evaluate("tp_kmp", model, local_predictions(model, grid));

  const auto res = run_episode(model, sc.correction_frames, correction_config(ExperimentKind::exp1, sc),
                               correction_script(ExperimentKind::exp1, sc));
  if (res.error) throw SimDiverged("correction pass diverged: " + *res.error);
  rep.corrected = res.model;
  rep.via_points = res.via_points;
  rep.correction_trace = res.trace;
  const int after_pass = evaluate("tp_kmp_corrected", rep.corrected, local_predictions(rep.corrected, grid));

  double max_force = 0.0;
  for (const auto& row : res.trace) max_force = std::max(max_force, row.force.norm());
  std::vector<std::size_t> per_frame(model.size(), 0);
  for (const auto& vp : res.via_points) ++per_frame[vp.frame_index.value_or(0)];
  rep.summary = Json{{"configurations", n},
                     {"baseline_tp_gmr_collisions", n - base_pass},
                     {"tp_kmp_collisions_before", n - before_pass},
                     {"tp_kmp_pass_after", after_pass},
                     {"via_points", res.via_points.size()},
                     {"via_points_per_frame", per_frame},
                     {"correction_peak_force", max_force},
                     {"passed", n - base_pass >= 4 && after_pass >= 14}};
}

void run_exp2(const Scenario& sc, const TpModel& model, ExperimentReport& rep) {
  const auto& cf = sc.correction_frames;
  const TpModel with_cam = add_placeholder_frame(model, cf.at(2), kPlaceholderVariance, sc.frame_labels.at(2));

  // placeholder neutrality on the correction configuration
  const auto probe = make_inputs(101, 1.0);
  const std::vector<FramePose> two(cf.begin(), cf.begin() + 2);
  const auto plain = fused_predict_batch(model, probe, two);
  const auto added = fused_predict_batch(with_cam, probe, cf);
  double neutral = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    neutral = std::max(neutral, (plain[i].mean - added[i].mean).norm() / plain[i].mean.norm());
  }

  const auto res = run_episode(with_cam, cf, correction_config(ExperimentKind::exp2, sc),
                               correction_script(ExperimentKind::exp2, sc));
  if (res.error) throw SimDiverged("correction pass diverged: " + *res.error);
  rep.corrected = res.model;
  rep.via_points = res.via_points;
  rep.correction_trace = res.trace;

  std::size_t in_camera = 0;
  for (const auto& vp : res.via_points) in_camera += vp.frame_index == 2u;
  const auto& cam_local = rep.corrected.locals.at(2).via_points;

  const double tol = 1e-3;
  const Index o2 = model.output_dim();
  double cam_var = 0.0;
  double precision_share = 0.0;  // box-frame precision relative to the camera's at the via-points
  for (const auto& vp : cam_local) {
    const auto f = fused_predict(rep.corrected, vp.s, cf);
    cam_var = std::max(cam_var, f.per_frame[2].cov.diagonal().maxCoeff());
    double others = 0.0;
    for (std::size_t p = 0; p < 2; ++p) others += f.per_frame[p].cov.llt().solve(Mat::Identity(o2, o2)).trace();
    precision_share = std::max(precision_share, others / f.per_frame[2].cov.llt().solve(Mat::Identity(o2, o2)).trace());
  }
  EpisodeConfig cfg = eval_config(sc);
  const auto table = local_predictions(rep.corrected, episode_grid(rep.corrected, cfg));
  int pass = 0;
  double worst_all = 0.0;
  for (std::size_t i = 0; i < sc.eval_frames.size(); ++i) {
    const auto& fr = sc.eval_frames[i];
    double worst = 0.0;
    for (const auto& vp : cam_local) {
      const Vec expected = map_point_to_global(vp.mu, fr[2]);
      worst = std::max(worst, (fused_predict(rep.corrected, vp.s, fr).mean - expected).norm());
    }
    EpisodeRunner run(rep.corrected, table, fr, cfg);
    while (!run.done()) run.advance();
    ConfigResult r{"tp_kmp_corrected", i, fr, !cam_local.empty() && worst <= tol, worst, run.trace()};
    pass += r.pass;
    worst_all = std::max(worst_all, worst);
    rep.configs.push_back(std::move(r));
  }
  rep.summary = Json{{"configurations", sc.eval_frames.size()},
                     {"placeholder_max_relative_change", neutral},
                     {"via_points", res.via_points.size()},
                     {"via_points_in_camera_frame", in_camera},
                     {"camera_max_variance_at_via_points", cam_var},
                     {"other_to_camera_precision", precision_share},
                     {"tolerance", tol},
                     {"worst_via_point_error", worst_all},
                     {"pass", pass},
                     {"passed", pass == static_cast<int>(sc.eval_frames.size()) && in_camera == res.via_points.size()}};
}

void run_exp3(const Scenario& sc, const TpModel& model, ExperimentReport& rep) {
  const auto& fr = sc.correction_frames;
  double in_dist = 0.0;
  const auto probe = make_inputs(101, 1.0);
  for (const auto& f : fused_predict_batch(model, probe, fr)) in_dist += compute_gains(sc.stiffness, f).GP.trace();
  in_dist /= static_cast<double>(probe.size());
  const auto far = fused_predict(model, 1.2, fr);
  const double trace_far = compute_gains(sc.stiffness, far).GP.trace();
  const double trace_raw_far = raw_gains(sc.stiffness, far.cov, far.cov_ep).GP.trace();

  // inner wall of box 2 facing the approach, present once the demonstrated motion is over
  ScriptedWall wall;
  wall.s0 = 1.0;
  wall.wall.point = fr[1].origin() - xz(0.5 * sc.box.inner_width, 0.0);
  wall.wall.normal = xz(1.0, 0.0);
  EpisodeScript walls;
  walls.walls = {wall};
  double peak[2] = {0.0, 0.0};
  const char* names[2] = {"uncertainty_wall", "raw_inverse_wall"};
  for (int m = 0; m < 2; ++m) {
    EpisodeConfig c = eval_config(sc);
    c.gains = m == 0 ? GainMode::uncertainty : GainMode::raw;
    const auto r = run_episode(model, fr, c, walls);
    for (const auto& row : r.trace) {
      if (row.s > 1.0) peak[m] = std::max(peak[m], row.contact.norm());
    }
    rep.configs.push_back(ConfigResult{names[m], static_cast<std::size_t>(m), fr, !r.error, peak[m], r.trace});
  }
  const double ratio = peak[1] > 0.0 ? peak[0] / peak[1] : 0.0;

  const auto res = run_episode(model, fr, correction_config(ExperimentKind::exp3, sc),
                               correction_script(ExperimentKind::exp3, sc));
  if (res.error) throw SimDiverged("correction pass diverged: " + *res.error);
  rep.corrected = res.model;
  rep.via_points = res.via_points;
  rep.correction_trace = res.trace;
  double worst = 0.0;
  bool beyond = !res.via_points.empty();
  for (const auto& vp : res.via_points) {
    beyond = beyond && vp.s > 1.0;
    worst = std::max(worst, (fused_predict(rep.corrected, vp.s, fr).mean - vp.mu).norm());
  }
  const double tol = 1e-3 * sc.workspace_diameter();
  EpisodeConfig c = eval_config(sc);
  const auto replayed = run_episode(rep.corrected, fr, c);
  rep.configs.push_back(ConfigResult{"tp_kmp_corrected", 0, fr, worst <= tol, worst, replayed.trace});

  const bool stiff_ok = trace_far <= 0.05 * in_dist;
  rep.summary = Json{{"in_distribution_trace_GP", in_dist},
                     {"trace_GP_at_1_2", trace_far},
                     {"raw_trace_GP_at_1_2", trace_raw_far},
                     {"trace_ratio", trace_far / in_dist},
                     {"w1_at_c2", sigmoid_weight(sc.stiffness, sc.stiffness.c2)},
                     {"peak_contact_uncertainty", peak[0]},
                     {"peak_contact_raw", peak[1]},
                     {"peak_contact_ratio", ratio},
                     {"via_points", res.via_points.size()},
                     {"via_points_beyond_data", beyond},
                     {"s_max_after", rep.corrected.s_max},
                     {"worst_via_point_error", worst},
                     {"tolerance", tol},
                     {"passed", stiff_ok && ratio < 0.2 && beyond && worst <= tol}};
}

}  // namespace

ExperimentReport replay_experiment(ExperimentKind kind, const Scenario& sc, const TpModel& model) {
  if (sc.kind != scenario_for(kind)) throw ValidationError(to_string(kind) + " needs the " + to_string(scenario_for(kind)) +
                                                           " scenario");
  ExperimentReport rep;
  rep.kind = kind;
  rep.config_hash = config_hash(sc);
  rep.seed = sc.seed;
  rep.corrected = model;
  switch (kind) {
    case ExperimentKind::exp1: run_exp1(sc, model, rep); break;
    case ExperimentKind::exp2: run_exp2(sc, model, rep); break;
    case ExperimentKind::exp3: run_exp3(sc, model, rep); break;
  }
  return rep;
}

ExperimentReport replay_experiment(ExperimentKind kind, std::uint64_t seed) {
  const Scenario sc = generate_scenario(scenario_for(kind), seed);
  return replay_experiment(kind, sc, train(sc.demos, sc.train));
}

Json to_json(const ExperimentReport& r) {
  Json configs = Json::array();
  for (const auto& c : r.configs) {
    Json frames = Json::array();
    for (const auto& f : c.frames) frames.push_back(to_json(f));
    configs.push_back(
        Json{{"method", c.method}, {"index", c.index}, {"frames", frames}, {"pass", c.pass}, {"value", c.value}});
  }
  Json vps = Json::array();
  for (const auto& vp : r.via_points) vps.push_back(to_json(vp));
  return Json{{"experiment", to_string(r.kind)},
              {"config_hash", r.config_hash},
              {"seed", r.seed},
              {"summary", r.summary},
              {"configurations", configs},
              {"via_points", vps}};
}

std::string to_markdown(const ExperimentReport& r) {
  std::ostringstream o;
  o << "# " << to_string(r.kind) << "\n\nconfig hash `" << r.config_hash << "`, seed " << r.seed << "\n\n";
  o << "| Metric | Value |\n|---|---|\n";
  for (const auto& [k, v] : r.summary.items()) o << "| " << k << " | " << v.dump() << " |\n";
  o << "\n| Method | # | Frames | Pass | Value |\n|---|---|---|---|---|\n";
  for (const auto& c : r.configs) {
    o << "| " << c.method << " | " << c.index << " | ";
    for (std::size_t p = 0; p < c.frames.size(); ++p) {
      o << (p ? " " : "") << "(" << fmt(c.frames[p].origin()(0), 3) << ", " << fmt(c.frames[p].origin()(1), 3) << ")";
    }
    o << " | " << (c.pass ? "yes" : "no") << " | " << fmt(c.value) << " |\n";
  }
  return o.str();
}

void write_report(const fs::path& dir, const ExperimentReport& r) {
  fs::create_directories(dir / "traces");
  write_json(dir / "report.json", to_json(r));
  std::ofstream(dir / "report.md") << to_markdown(r);
  for (const auto& c : r.configs) {
    write_trace_csv(dir / "traces" / (c.method + "_" + std::to_string(c.index) + ".csv"), c.trace);
  }
  if (!r.correction_trace.empty()) write_trace_csv(dir / "traces" / "correction.csv", r.correction_trace);
  save_model(dir / "corrected_model.json", r.corrected);
}

void write_report(const fs::path& dir, const BenchmarkReport& r) {
  fs::create_directories(dir);
  write_json(dir / "report.json", to_json(r));
  std::ofstream(dir / "report.md") << to_markdown(r);
}

}  // namespace tpkmp
