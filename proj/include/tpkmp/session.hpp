#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "tpkmp/episode.hpp"
#include "tpkmp/io.hpp"

namespace tpkmp {

struct SessionOptions {
  double drag_stiffness = 500.0;  // N/m, spring towards a drag target
  double drag_damping = 0.0;
  /// A force or drag event stays applied for this many control steps unless refreshed.
  std::size_t hold_steps = 40;

  void validate() const;
};

Json to_json(const SessionOptions& o);
SessionOptions session_options_from_json(const Json& j, SessionOptions base = {});

/// One simulated teaching session. Every input is an event; the event log
/// (client events interleaved with step counts) fully determines the result, so
/// replay() rebuilds the same snapshots bit for bit.
///
/// Events: {"type": "force", "F": [...] | null}, {"type": "drag", "target": [...] | null},
/// {"type": "button", "pressed": bool}, {"type": "move_frame", "index": i, "b": [...], "A": [[...]]},
/// {"type": "add_frame", "b": [...], "A": [[...]], "gamma_D": g, "label": str}, {"type": "reset"}.
///
/// Snapshot 0 is the initial model. Each finished episode (run to its end or reset)
/// commits its via-points and appends a snapshot.
class Session {
 public:
  Session(TpModel model, std::vector<FramePose> frames, EpisodeConfig cfg, SessionOptions opt = {});

  /// Validates and applies a client event. Invalid events throw and are not logged.
  void apply(const Json& event);

  /// Advances up to n control steps; stops at the end of the episode.
  std::size_t advance(std::size_t n = 1);

  bool done() const noexcept { return !runner_; }
  std::size_t step() const noexcept { return runner_ ? runner_->index() : steps_; }
  std::size_t steps() const noexcept { return steps_; }
  std::size_t episode() const noexcept { return episode_; }

  /// Rows of the current (or last finished) episode.
  const std::vector<TraceRow>& trace() const noexcept;
  const TpModel& model() const noexcept { return snapshots_.back(); }
  const std::vector<TpModel>& snapshots() const noexcept { return snapshots_; }
  const std::vector<FramePose>& frames() const noexcept;
  /// Via-points of the current episode that are not yet committed (global coordinates).
  const std::vector<ViaPoint>& pending() const noexcept;
  /// Committed via-points of all finished episodes, in commit order.
  const std::vector<ViaPoint>& committed() const noexcept { return committed_; }

  const EpisodeConfig& config() const noexcept { return cfg_; }
  const SessionOptions& options() const noexcept { return opt_; }

  /// {"header": {"frames", "cfg", "options"}, "events": [...]}
  Json log() const;

  /// WebSocket state message for one trace row.
  Json state_message(const TraceRow& row) const;

 private:
  void start_episode();
  void finish_episode();
  void log_advance(std::size_t n);

  EpisodeConfig cfg_;
  SessionOptions opt_;
  std::vector<FramePose> initial_frames_;
  std::vector<FramePose> frames_;
  std::vector<TpModel> snapshots_;
  std::vector<ViaPoint> committed_;
  std::unique_ptr<EpisodeRunner> runner_;
  std::vector<TraceRow> last_trace_;
  std::size_t steps_ = 0;
  std::size_t episode_ = 0;

  std::optional<Vec> force_;
  std::optional<Vec> drag_;
  std::size_t force_age_ = 0;
  std::size_t drag_age_ = 0;
  bool button_ = false;

  Json events_ = Json::array();
};

/// Re-runs a session log from `model`; the final model equals the recorded session's.
Session replay(const TpModel& model, const Json& log);

}  // namespace tpkmp
