#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tpkmp/errors.hpp"
#include "tpkmp/experiments.hpp"
#include "tpkmp/io.hpp"
#include "tpkmp/session.hpp"
#ifdef TPKMP_HAVE_SERVICE
#include "tpkmp/service.hpp"
#endif

using namespace tpkmp;
namespace fs = std::filesystem;

namespace {

Scenario scenario_arg(const std::string& path, const std::string& kind, std::uint64_t seed) {
  if (!path.empty()) return load_scenario(path);
  return generate_scenario(scenario_kind_from_string(kind), seed);
}

std::vector<FramePose> pick_frames(const Scenario& sc, int config) {
  if (config < 0) return sc.correction_frames;
  if (static_cast<std::size_t>(config) >= sc.eval_frames.size()) {
    throw ValidationError("configuration " + std::to_string(config) + " out of range (" +
                          std::to_string(sc.eval_frames.size()) + ")");
  }
  return sc.eval_frames[static_cast<std::size_t>(config)];
}

EpisodeConfig scenario_config(const Scenario& sc) {
  EpisodeConfig c;
  c.stiffness = sc.stiffness;
  c.trigger = sc.trigger;
  c.duration_scale = sc.duration_scale;
  c.rate_hz = sc.rate_hz;
  c.s_end = sc.s_end;
  return c;
}

void print_summary(const std::string& hash, const Json& summary) {
  std::cout << "config hash " << hash << "\n" << summary.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TP-KMP toolkit: train, correct, replay and serve task-parameterized KMP models"};
  app.require_subcommand(1);

  std::string scenario_file, kind = "pick_place", model_file, out;
  std::uint64_t seed = 0;
  const auto scenario_opts = [&](CLI::App* c) {
    c->add_option("--scenario", scenario_file, "scenario.json (generated from --kind/--seed when omitted)");
    c->add_option("--kind", kind, "pick_place | height_generalization | new_frame | extension");
    c->add_option("--seed", seed, "scenario seed");
  };

  auto* gen = app.add_subcommand("generate", "Write a toy scenario with its demo CSV files");
  scenario_opts(gen);
  gen->add_option("--out", out, "output directory")->required();

  int components = 0;
  long inputs = 0;
  auto* tr = app.add_subcommand("train", "Fit per-frame GMMs and local KMPs");
  scenario_opts(tr);
  tr->add_option("--components", components, "GMM components");
  tr->add_option("--inputs", inputs, "reference inputs N");
  tr->add_option("--out", out, "model JSON")->required();

  int config = -1;
  std::string gains = "uncertainty", trace_file;
  double s_end = 0.0;
  auto* run = app.add_subcommand("run", "Run one unperturbed episode and write its trace");
  scenario_opts(run);
  run->add_option("--model", model_file, "model JSON")->required();
  run->add_option("--config", config, "evaluation configuration index (correction frames when omitted)");
  run->add_option("--gains", gains, "uncertainty | raw");
  run->add_option("--s-end", s_end, "last input (scenario value when omitted)");
  run->add_option("--trace", trace_file, "trace CSV")->required();

  std::string script_file;
  auto* cor = app.add_subcommand("correct", "Replay a session event log and save the corrected model");
  scenario_opts(cor);
  cor->add_option("--model", model_file, "model JSON")->required();
  cor->add_option("--script", script_file, "session log {header, events} or a bare event array")->required();
  cor->add_option("--trace", trace_file, "trace CSV of the last episode");
  cor->add_option("--out", out, "corrected model JSON")->required();

  std::string experiment;
  auto* ev = app.add_subcommand("eval", "Replay an experiment and write report.json, report.md and traces");
  scenario_opts(ev);
  ev->add_option("--experiment", experiment, "exp1 | exp2 | exp3 (from the scenario kind when omitted)");
  ev->add_option("--model", model_file, "trained model (trained from the scenario when omitted)");
  ev->add_option("--out", out, "report directory")->required();

  int runs = 100;
  std::uint64_t bench_seed = 1;
  auto* bench = app.add_subcommand("bench", "Start/end/average comparison on random out-of-range placements");
  scenario_opts(bench);
  bench->add_option("--model", model_file, "trained TP-KMP (trained from the scenario when omitted)");
  bench->add_option("--runs", runs, "number of placements");
  bench->add_option("--bench-seed", bench_seed, "placement seed");
  bench->add_option("--out", out, "report directory")->required();

  int samples = 201;
  auto* ex = app.add_subcommand("export", "Fused trajectory (mean, covariance split, gains) as CSV");
  scenario_opts(ex);
  ex->add_option("--model", model_file, "model JSON")->required();
  ex->add_option("--config", config, "evaluation configuration index (correction frames when omitted)");
  ex->add_option("--samples", samples, "number of inputs");
  ex->add_option("--s-end", s_end, "last input (scenario value when omitted)");
  ex->add_option("--trace", trace_file, "output CSV")->required();

#ifdef TPKMP_HAVE_SERVICE
  ServiceOptions sopt;
  auto* serve = app.add_subcommand("serve", "HTTP + WebSocket session service");
  serve->add_option("--address", sopt.address, "bind address");
  serve->add_option("--port", sopt.port, "port (0 picks one)");
  serve->add_option("--data-dir", sopt.data_dir, "models, scenarios and session logs");
  serve->add_option("--threads", sopt.threads, "I/O threads");
#endif

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const Scenario sc = scenario_arg(scenario_file, kind, seed);
      const auto file = write_scenario(out, sc);
      std::cout << file.string() << "  config hash " << config_hash(sc) << "\n";
    } else if (*tr) {
      Scenario sc = scenario_arg(scenario_file, kind, seed);
      if (components > 0) sc.train.components = components;
      if (inputs > 0) sc.train.inputs = inputs;
      save_model(out, train(sc.demos, sc.train));
      std::cout << out << "  config hash " << config_hash(sc) << "\n";
    } else if (*run) {
      const Scenario sc = scenario_arg(scenario_file, kind, seed);
      EpisodeConfig c = scenario_config(sc);
      c.record = false;
      c.gains = gains == "raw" ? GainMode::raw : GainMode::uncertainty;
      if (gains != "raw" && gains != "uncertainty") throw ValidationError("gains must be raw or uncertainty");
      if (s_end > 0.0) c.s_end = s_end;
      const auto frames = pick_frames(sc, config);
      const auto res = run_episode(load_model(model_file), frames, c);
      write_trace_csv(trace_file, res.trace);
      const auto hit = first_collision(sc, frames, res.trace);
      print_summary(config_hash(sc), Json{{"steps", res.trace.size()},
                                          {"collision_s", hit ? Json(*hit) : Json(nullptr)},
                                          {"diverged", res.error ? Json(*res.error) : Json(nullptr)}});
      if (res.error) return 2;
    } else if (*cor) {
      const Scenario sc = scenario_arg(scenario_file, kind, seed);
      const TpModel model = load_model(model_file);
      const Json script = read_json(script_file);
      Session session = [&] {
        if (script.is_object()) return replay(model, script);
        Session s(model, sc.correction_frames, scenario_config(sc));
        for (const auto& e : script) {
          if (e.value("type", "") == "advance") {
            s.advance(e.at("steps").get<std::size_t>());
          } else {
            s.apply(e);
          }
        }
        while (!s.done()) s.advance(s.steps());
        return s;
      }();
      save_model(out, session.model());
      if (!trace_file.empty()) write_trace_csv(trace_file, session.trace());
      print_summary(config_hash(sc), Json{{"episodes", session.snapshots().size() - 1},
                                          {"via_points", session.committed().size()}});
    } else if (*ev) {
      const Scenario sc = scenario_arg(scenario_file, kind, seed);
      ExperimentKind k = ExperimentKind::exp1;
      if (!experiment.empty()) {
        k = experiment_kind_from_string(experiment);
      } else if (sc.kind == ScenarioKind::new_frame) {
        k = ExperimentKind::exp2;
      } else if (sc.kind == ScenarioKind::extension) {
        k = ExperimentKind::exp3;
      }
      // --experiment alone picks its own scenario
      const Scenario used = scenario_file.empty() && !experiment.empty() ? generate_scenario(scenario_for(k), seed) : sc;
      const TpModel model = model_file.empty() ? train(used.demos, used.train) : load_model(model_file);
      const auto rep = replay_experiment(k, used, model);
      write_report(out, rep);
      print_summary(rep.config_hash, rep.summary);
    } else if (*bench) {
      const Scenario sc = scenario_arg(scenario_file, kind, seed);
      const TpModel model = model_file.empty() ? train(sc.demos, sc.train) : load_model(model_file);
      const auto rep = bench_pick_place(sc, model, runs, bench_seed);
      write_report(out, rep);
      std::cout << to_markdown(rep);
    } else if (*ex) {
      const Scenario sc = scenario_arg(scenario_file, kind, seed);
      const TpModel model = load_model(model_file);
      if (samples < 2) throw ValidationError("samples must be >= 2");
      const auto q = make_inputs(samples, s_end > 0.0 ? s_end : sc.s_end);
      const auto fused = fused_predict_batch(model, q, pick_frames(sc, config));
      std::ofstream f(trace_file);
      if (!f) throw std::runtime_error("cannot write " + trace_file);
      f.precision(17);
      f << "# config_hash " << config_hash(sc) << "\ns";
      const Index o = model.output_dim();
      for (Index d = 0; d < o; ++d) f << ",mu" << d + 1;
      for (Index d = 0; d < o; ++d) f << ",var" << d + 1;
      f << ",sigma2_ep,w1,GP_trace\n";
      for (std::size_t i = 0; i < q.size(); ++i) {
        const auto& p = fused[i];
        const auto g = compute_gains(sc.stiffness, p);
        f << q[i];
        for (Index d = 0; d < o; ++d) f << "," << p.mean(d);
        for (Index d = 0; d < o; ++d) f << "," << p.cov(d, d);
        f << "," << epistemic_variance(p.cov_ep) << "," << g.w1 << "," << g.GP.trace() << "\n";
      }
      std::cout << trace_file << "  config hash " << config_hash(sc) << "\n";
    }
#ifdef TPKMP_HAVE_SERVICE
    else if (*serve) {
      Service service(sopt);
      service.start();
      std::cout << "listening on " << sopt.address << ":" << service.port() << std::endl;
      service.wait();
    }
#endif
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
