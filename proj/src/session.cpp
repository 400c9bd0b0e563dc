#include "tpkmp/session.hpp"

#include "tpkmp/errors.hpp"

namespace tpkmp {

void SessionOptions::validate() const {
  if (!(drag_stiffness > 0.0)) throw ValidationError("drag stiffness must be positive");
  if (!(drag_damping >= 0.0)) throw ValidationError("drag damping must be non-negative");
  if (hold_steps < 1) throw ValidationError("hold_steps must be at least 1");
}

Json to_json(const SessionOptions& o) {
  return Json{{"drag_stiffness", o.drag_stiffness}, {"drag_damping", o.drag_damping}, {"hold_steps", o.hold_steps}};
}

SessionOptions session_options_from_json(const Json& j, SessionOptions o) {
  if (j.contains("drag_stiffness")) o.drag_stiffness = j.at("drag_stiffness").get<double>();
  if (j.contains("drag_damping")) o.drag_damping = j.at("drag_damping").get<double>();
  if (j.contains("hold_steps")) o.hold_steps = j.at("hold_steps").get<std::size_t>();
  o.validate();
  return o;
}

Session::Session(TpModel model, std::vector<FramePose> frames, EpisodeConfig cfg, SessionOptions opt)
    : cfg_(std::move(cfg)), opt_(opt), initial_frames_(frames), frames_(std::move(frames)) {
  opt_.validate();
  snapshots_.push_back(std::move(model));
  start_episode();
}

void Session::start_episode() {
  runner_ = std::make_unique<EpisodeRunner>(model(), frames_, cfg_);
  steps_ = runner_->steps();
  ++episode_;
  force_.reset();
  drag_.reset();
  button_ = false;
}

void Session::finish_episode() {
  frames_ = runner_->frames();
  EpisodeResult r = runner_->finish();
  committed_.insert(committed_.end(), r.via_points.begin(), r.via_points.end());
  last_trace_ = std::move(r.trace);
  snapshots_.push_back(std::move(r.model));
  runner_.reset();
}

const std::vector<TraceRow>& Session::trace() const noexcept { return runner_ ? runner_->trace() : last_trace_; }

const std::vector<FramePose>& Session::frames() const noexcept { return runner_ ? runner_->frames() : frames_; }

const std::vector<ViaPoint>& Session::pending() const noexcept {
  static const std::vector<ViaPoint> none;
  return runner_ ? runner_->recorder().pending() : none;
}

void Session::apply(const Json& event) {
  if (!event.is_object() || !event.contains("type") || !event.at("type").is_string()) {
    throw ValidationError("event needs a string 'type'");
  }
  const std::string type = event.at("type").get<std::string>();
  const Index o = model().output_dim();
  const auto vec_or_null = [&](const char* key) -> std::optional<Vec> {
    if (!event.contains(key)) throw ValidationError(type + " event lacks '" + key + "'");
    if (event.at(key).is_null()) return std::nullopt;
    Vec v = vec_from_json(event.at(key));
    if (v.size() != o) throw DimensionError(type + " event has wrong dimension");
    return v;
  };

  if (type == "force") {
    force_ = vec_or_null("F");
    force_age_ = 0;
  } else if (type == "drag") {
    drag_ = vec_or_null("target");
    drag_age_ = 0;
  } else if (type == "button") {
    if (!event.contains("pressed") || !event.at("pressed").is_boolean()) {
      throw ValidationError("button event needs boolean 'pressed'");
    }
    if (event.at("pressed").get<bool>()) button_ = true;
  } else if (type == "move_frame") {
    const auto index = event.at("index").get<std::size_t>();
    if (index >= frames().size()) throw ValidationError("frame index out of range");
    FramePose pose = frame_from_json(event);
    if (pose.dim() != o) throw DimensionError("frame dimension mismatch");
    if (runner_) {
      runner_->set_frame(index, std::move(pose));
    } else {
      frames_[index] = std::move(pose);
    }
  } else if (type == "add_frame") {
    if (!runner_) throw ContractViolation("episode finished; reset before adding frames");
    FramePose pose = frame_from_json(event);
    const double gamma_D = event.value("gamma_D", 1e4);
    runner_->add_frame(std::move(pose), gamma_D, event.value("label", std::string()));
  } else if (type == "reset") {
    if (runner_) finish_episode();
    start_episode();
  } else {
    throw ValidationError("unknown event type '" + type + "'");
  }
  events_.push_back(event);
}

std::size_t Session::advance(std::size_t n) {
  std::size_t taken = 0;
  const Index o = model().output_dim();
  while (taken < n && runner_) {
    Vec live = Vec::Zero(o);
    bool any = false;
    if (force_ && force_age_ < opt_.hold_steps) {
      live += *force_;
      any = true;
    }
    if (drag_ && drag_age_ < opt_.hold_steps) {
      const SimState& st = runner_->state();
      live += opt_.drag_stiffness * (*drag_ - st.pos) - opt_.drag_damping * st.vel;
      any = true;
    }
    runner_->advance(any ? &live : nullptr, button_);
    button_ = false;
    ++force_age_;
    ++drag_age_;
    ++taken;
    if (runner_->done()) finish_episode();
  }
  log_advance(taken);
  return taken;
}

void Session::log_advance(std::size_t n) {
  if (n == 0) return;
  if (!events_.empty() && events_.back().at("type") == "advance") {
    events_.back()["steps"] = events_.back().at("steps").get<std::size_t>() + n;
  } else {
    events_.push_back(Json{{"type", "advance"}, {"steps", n}});
  }
}

Json Session::log() const {
  Json frames = Json::array();
  for (const auto& f : initial_frames_) frames.push_back(to_json(f));
  return Json{{"header", Json{{"frames", frames}, {"cfg", to_json(cfg_)}, {"options", to_json(opt_)}}},
              {"events", events_}};
}

Json Session::state_message(const TraceRow& row) const {
  Json frames = Json::array();
  for (const auto& f : this->frames()) frames.push_back(to_json(f));
  Json j = to_json(row);
  j["type"] = "state";
  j["episode"] = episode_;
  j["frames"] = std::move(frames);
  j["via_points"] = pending().size();
  return j;
}

Session replay(const TpModel& model, const Json& log) {
  const Json& h = log.at("header");
  std::vector<FramePose> frames;
  for (const auto& f : h.at("frames")) frames.push_back(frame_from_json(f));
  Session s(model, std::move(frames), episode_config_from_json(h.at("cfg")),
            session_options_from_json(h.value("options", Json::object())));
  for (const auto& e : log.at("events")) {
    if (e.at("type") == "advance") {
      s.advance(e.at("steps").get<std::size_t>());
    } else {
      s.apply(e);
    }
  }
  return s;
}

}  // namespace tpkmp
