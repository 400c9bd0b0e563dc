#include "tpkmp/episode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "tpkmp/errors.hpp"

namespace tpkmp {

Vec DragSegment::target(double s) const {
  if (waypoints.empty()) throw ValidationError("drag segment has no waypoints");
  if (s <= waypoints.front().first) return waypoints.front().second;
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const auto& [sa, a] = waypoints[i - 1];
    const auto& [sb, b] = waypoints[i];
    if (s <= sb) {
      const double u = sb > sa ? (s - sa) / (sb - sa) : 1.0;
      return (1.0 - u) * a + u * b;
    }
  }
  return waypoints.back().second;
}

void EpisodeConfig::validate() const {
  stiffness.validate();
  trigger.validate();
  if (!(duration_scale > 0.0)) throw ValidationError("duration_scale must be positive");
  if (!(rate_hz >= 100.0)) throw ValidationError("control rate must be at least 100 Hz");
  if (!(mass > 0.0)) throw ValidationError("mass must be positive");
  if (s_end && !(*s_end > 0.0)) throw ValidationError("s_end must be positive");
}

std::size_t episode_steps(const TpModel& model, const EpisodeConfig& cfg) {
  const double s_end = cfg.s_end.value_or(model.s_max);
  return static_cast<std::size_t>(std::llround(s_end * cfg.duration_scale * cfg.rate_hz));
}

std::vector<double> episode_grid(const TpModel& model, const EpisodeConfig& cfg) {
  const std::size_t n = episode_steps(model, cfg);
  const double dt = 1.0 / cfg.rate_hz;
  std::vector<double> g(n + 1);
  for (std::size_t k = 0; k <= n; ++k) g[k] = static_cast<double>(k) * dt / cfg.duration_scale;
  return g;
}

EpisodeRunner::EpisodeRunner(TpModel model, std::vector<FramePose> frames, EpisodeConfig cfg, EpisodeScript script)
    : model_(std::move(model)),
      frames_(std::move(frames)),
      cfg_(cfg),
      script_(std::move(script)),
      recorder_(cfg.trigger) {
  cfg_.validate();
  model_.validate();
  grid_ = episode_grid(model_, cfg_);
  table_ = local_predictions(model_, grid_, cfg_.exec);
  init();
}

EpisodeRunner::EpisodeRunner(TpModel model, std::vector<std::vector<Prediction>> table, std::vector<FramePose> frames,
                             EpisodeConfig cfg, EpisodeScript script)
    : model_(std::move(model)),
      frames_(std::move(frames)),
      cfg_(cfg),
      script_(std::move(script)),
      table_(std::move(table)),
      recorder_(cfg.trigger) {
  cfg_.validate();
  model_.validate();
  grid_ = episode_grid(model_, cfg_);
  if (table_.size() != model_.size()) throw DimensionError("table does not match model frames");
  for (const auto& t : table_) {
    if (t.size() != grid_.size()) throw DimensionError("table does not cover the control grid");
  }
  init();
}

void EpisodeRunner::init() {
  if (frames_.size() != model_.size()) throw DimensionError("frame count does not match model");
  const Index o = model_.output_dim();
  for (const auto& f : script_.forces) {
    if (f.force.size() != o) throw DimensionError("scripted force dimension mismatch");
  }
  for (const auto& d : script_.drags) {
    if (d.waypoints.empty()) throw ValidationError("drag segment has no waypoints");
    for (const auto& w : d.waypoints) {
      if (w.second.size() != o) throw DimensionError("drag waypoint dimension mismatch");
    }
  }
  for (const auto& w : script_.walls) {
    if (w.wall.point.size() != o || w.wall.normal.size() != o) throw DimensionError("wall dimension mismatch");
  }
  std::stable_sort(script_.frame_moves.begin(), script_.frame_moves.end(),
                   [](const FrameMove& a, const FrameMove& b) { return a.s < b.s; });

  dt_ = 1.0 / cfg_.rate_hz;
  steps_ = grid_.size() - 1;

  pressed_.assign(steps_ + 1, false);
  for (double b : script_.buttons) {
    const auto it = std::lower_bound(grid_.begin() + 1, grid_.end(), b);
    if (it != grid_.end()) pressed_[static_cast<std::size_t>(it - grid_.begin())] = true;
  }

  state_.mass = cfg_.mass;
  if (cfg_.start && cfg_.start->size() != o) throw DimensionError("start position dimension mismatch");
  state_.pos = cfg_.start ? *cfg_.start : fused_at(0).mean;
  state_.vel = Vec::Zero(o);
  state_.force = Vec::Zero(o);
  state_.t = 0.0;
}

double EpisodeRunner::input_at(std::size_t k) const {
  return static_cast<double>(k) * dt_ / cfg_.duration_scale;
}

FusedPrediction EpisodeRunner::fused_at(std::size_t k) const {
  std::vector<Prediction> local;
  local.reserve(table_.size());
  for (const auto& t : table_) local.push_back(t[k]);
  return fuse(local, frames_, model_.kernel.signal_variance);
}

void EpisodeRunner::set_frame(std::size_t p, FramePose pose) {
  if (p >= frames_.size()) throw ValidationError("frame index out of range");
  if (pose.dim() != model_.output_dim()) throw DimensionError("frame dimension mismatch");
  frames_[p] = std::move(pose);
}

void EpisodeRunner::add_frame(FramePose pose, double gamma_D, std::string label) {
  TpModel next = add_placeholder_frame(model_, pose, gamma_D, std::move(label));
  TpModel single;
  single.kernel = next.kernel;
  single.hyper = next.hyper;
  single.s_max = next.s_max;
  single.locals = {next.locals.back()};
  table_.push_back(std::move(local_predictions(single, grid_, cfg_.exec).front()));
  model_ = std::move(next);
  frames_.push_back(std::move(pose));
}

const TraceRow& EpisodeRunner::advance(const Vec* live_force, bool live_button) {
  if (done()) throw ContractViolation("episode already finished");
  const std::size_t k = k_ + 1;
  const double s = grid_[k];
  while (next_move_ < script_.frame_moves.size() && script_.frame_moves[next_move_].s <= s) {
    const auto& m = script_.frame_moves[next_move_++];
    set_frame(m.index, m.pose);
  }

  const FusedPrediction pred = fused_at(k);
  const Gains g = cfg_.gains == GainMode::raw ? raw_gains(cfg_.stiffness, pred.cov, pred.cov_ep, cfg_.mass)
                                              : compute_gains(cfg_.stiffness, pred, cfg_.mass);

  const Index o = model_.output_dim();
  Vec human = Vec::Zero(o);
  for (const auto& f : script_.forces) {
    if (s >= f.s0 && s <= f.s1) human += f.force;
  }
  for (const auto& d : script_.drags) {
    if (s >= d.s0 && s <= d.s1) human += d.stiffness * (d.target(s) - state_.pos) - d.damping * state_.vel;
  }
  if (live_force) {
    if (live_force->size() != o) throw DimensionError("live force dimension mismatch");
    human += *live_force;
  }
  Vec contact = Vec::Zero(o);
  for (const auto& w : script_.walls) {
    if (s >= w.s0 && s <= w.s1) contact += w.wall.force(state_.pos);
  }

  state_ = step(state_, g, pred.mean, human + contact, dt_);
  state_.t = s;
  k_ = k;

  const bool button = pressed_[k] || live_button;
  if (cfg_.record) recorder_.observe(StreamSample{s, pred.mean, state_.pos, human, button}, frames_);

  TraceRow row;
  row.t = static_cast<double>(k) * dt_;
  row.s = s;
  row.desired = pred.mean;
  row.actual = state_.pos;
  row.force = human + contact;
  row.contact = contact;
  row.trace_gp = g.GP.trace();
  row.sigma2_ep = epistemic_variance(pred.cov_ep);
  row.w1 = g.w1;
  trace_.push_back(std::move(row));
  return trace_.back();
}

EpisodeResult EpisodeRunner::finish() {
  EpisodeResult out{trace_, model_, {}, std::nullopt};
  out.via_points = recorder_.commit(out.model);
  return out;
}

EpisodeResult run_episode(const TpModel& model, const std::vector<FramePose>& frames, const EpisodeConfig& cfg,
                          const EpisodeScript& script) {
  EpisodeRunner runner(model, frames, cfg, script);
  try {
    while (!runner.done()) runner.advance();
  } catch (const SimDiverged& e) {
    EpisodeResult out{runner.trace(), model, {}, std::string(e.what())};
    return out;
  }
  return runner.finish();
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  const Index o = trace.empty() ? 0 : trace.front().desired.size();
  out << "t,s";
  for (const char* name : {"desired", "actual", "F"}) {
    for (Index a = 0; a < o; ++a) out << ',' << name << '_' << (a + 1);
  }
  out << ",trace_GP,sigma2_ep,w1\n";
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : trace) {
    out << r.t << ',' << r.s;
    for (const Vec* v : {&r.desired, &r.actual, &r.force}) {
      for (Index a = 0; a < o; ++a) out << ',' << (*v)(a);
    }
    out << ',' << r.trace_gp << ',' << r.sigma2_ep << ',' << r.w1 << '\n';
  }
  out.precision(old);
}

}  // namespace tpkmp
