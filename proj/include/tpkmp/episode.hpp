#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tpkmp/impedance.hpp"
#include "tpkmp/tp_model.hpp"

namespace tpkmp {

/// Constant external force on [s0, s1].
struct ForceSegment {
  double s0 = 0.0;
  double s1 = 0.0;
  Vec force;
};

/// A hand dragging the end effector: spring of `stiffness` towards a
/// piecewise-linear path through `waypoints` (s, position), active on [s0, s1].
struct DragSegment {
  double s0 = 0.0;
  double s1 = 0.0;
  double stiffness = 500.0;
  double damping = 0.0;
  std::vector<std::pair<double, Vec>> waypoints;

  Vec target(double s) const;
};

struct FrameMove {
  double s = 0.0;
  std::size_t index = 0;
  FramePose pose;
};

/// Wall present on [s0, s1] only.
struct ScriptedWall {
  double s0 = 0.0;
  double s1 = std::numeric_limits<double>::infinity();
  VirtualWall wall;
};

struct EpisodeScript {
  std::vector<ForceSegment> forces;
  std::vector<DragSegment> drags;
  std::vector<double> buttons;  // pressed for one control step at the first step with s >= value
  std::vector<FrameMove> frame_moves;
  std::vector<ScriptedWall> walls;
};

enum class GainMode { uncertainty, raw };

struct EpisodeConfig {
  StiffnessConfig stiffness;
  TriggerConfig trigger;
  double duration_scale = 10.0;  // seconds per unit of input
  double rate_hz = 200.0;
  double mass = 1.0;
  std::optional<double> s_end;  // model.s_max when unset
  std::optional<Vec> start;     // initial position, the desired start when unset
  GainMode gains = GainMode::uncertainty;
  bool record = true;  // create via-points from triggers
  Exec exec = Exec::parallel;

  void validate() const;
};

struct TraceRow {
  double t = 0.0;  // seconds
  double s = 0.0;
  Vec desired;
  Vec actual;
  Vec force;    // total external force, walls included
  Vec contact;  // wall part of `force`
  double trace_gp = 0.0;
  double sigma2_ep = 0.0;
  double w1 = 0.0;
};

struct EpisodeResult {
  std::vector<TraceRow> trace;
  TpModel model;
  std::vector<ViaPoint> via_points;
  std::optional<std::string> error;  // set when the simulation diverged
};

/// Steps an impedance-controlled point mass along the fused trajectory. Local
/// predictions for the whole control grid are computed up front; fusion with the
/// current frame poses happens per step, so frames may move mid-episode.
/// Human forces (scripted, drag, live) feed the trigger; wall contact does not.
/// Via-points are committed to the model by finish().
class EpisodeRunner {
 public:
  EpisodeRunner(TpModel model, std::vector<FramePose> frames, EpisodeConfig cfg, EpisodeScript script = {});
  /// Uses a precomputed local table over the control grid, table[p][k] at input_at(k).
  EpisodeRunner(TpModel model, std::vector<std::vector<Prediction>> table, std::vector<FramePose> frames,
                EpisodeConfig cfg, EpisodeScript script = {});

  std::size_t steps() const noexcept { return steps_; }
  std::size_t index() const noexcept { return k_; }
  bool done() const noexcept { return k_ >= steps_; }
  double dt() const noexcept { return dt_; }
  double input_at(std::size_t k) const;

  /// Advances one control step. `live_force` is added to the scripted forces.
  const TraceRow& advance(const Vec* live_force = nullptr, bool live_button = false);

  void set_frame(std::size_t p, FramePose pose);
  /// Appends a placeholder frame (see add_placeholder_frame) and extends the local table.
  void add_frame(FramePose pose, double gamma_D, std::string label = {});
  const std::vector<FramePose>& frames() const noexcept { return frames_; }
  const SimState& state() const noexcept { return state_; }
  const std::vector<TraceRow>& trace() const noexcept { return trace_; }
  const CorrectionRecorder& recorder() const noexcept { return recorder_; }
  const TpModel& model() const noexcept { return model_; }

  /// Commits the recorded via-points and hands back trace and updated model.
  EpisodeResult finish();

 private:
  void init();
  FusedPrediction fused_at(std::size_t k) const;

  TpModel model_;
  std::vector<FramePose> frames_;
  EpisodeConfig cfg_;
  EpisodeScript script_;
  std::vector<double> grid_;
  std::vector<std::vector<Prediction>> table_;
  std::vector<bool> pressed_;
  std::size_t steps_ = 0;
  std::size_t k_ = 0;
  std::size_t next_move_ = 0;
  double dt_ = 0.0;
  SimState state_;
  CorrectionRecorder recorder_;
  std::vector<TraceRow> trace_;
};

/// Number of control steps for `cfg` on `model`, and the matching input grid.
std::size_t episode_steps(const TpModel& model, const EpisodeConfig& cfg);
std::vector<double> episode_grid(const TpModel& model, const EpisodeConfig& cfg);

/// Runs an episode to the end. SimDiverged is caught and reported with the partial trace.
EpisodeResult run_episode(const TpModel& model, const std::vector<FramePose>& frames, const EpisodeConfig& cfg,
                          const EpisodeScript& script = {});

/// t,s,desired_*,actual_*,F_*,trace_GP,sigma2_ep,w1
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

}  // namespace tpkmp
