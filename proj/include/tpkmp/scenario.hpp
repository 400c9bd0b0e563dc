#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tpkmp/impedance.hpp"
#include "tpkmp/tp_model.hpp"

namespace tpkmp {

enum class ScenarioKind { pick_place, height_generalization, new_frame, extension };
std::string to_string(ScenarioKind k);
ScenarioKind scenario_kind_from_string(const std::string& name);

/// Open box in the (x, z) plane. The frame origin is the grasp point, `grasp_height`
/// above the inner floor; walls rise `wall_height` above the floor.
struct BoxGeometry {
  double inner_width = 0.10;
  double wall = 0.01;
  double wall_height = 0.16;
  double grasp_height = 0.04;
};

/// True when x lies inside the solid (walls or floor) of the box at `pose`.
bool box_collision(const BoxGeometry& box, const FramePose& pose, const Vec& x);

/// Waypoint shape of a demonstration: lift out of box 1 on [0, t_up], transport at
/// `lift` above box 1 to `lift` above box 2 on [t_up, t_down], lower into box 2.
/// Quintic blends, zero velocity and acceleration at every waypoint.
struct PickPlaceShape {
  double lift = 0.16;
  double t_up = 0.2;
  double t_down = 0.8;

  Vec at(const Vec& b1, const Vec& b2, double s) const;
};

struct Scenario {
  std::string name;
  ScenarioKind kind = ScenarioKind::pick_place;
  std::uint64_t seed = 0;
  std::vector<Demonstration> demos;
  std::vector<std::string> frame_labels;
  /// Frame-pose sets for evaluation; sizes may exceed the trained frame count when
  /// the scenario adds frames (new_frame).
  std::vector<std::vector<FramePose>> eval_frames;
  /// Configuration used for the scripted correction pass.
  std::vector<FramePose> correction_frames;
  TrainConfig train;
  TriggerConfig trigger;
  StiffnessConfig stiffness;
  PickPlaceShape shape;
  BoxGeometry box;
  double duration_scale = 10.0;
  double rate_hz = 200.0;
  double s_end = 1.0;
  double noise = 5e-4;

  /// Bounding-box diagonal of all demonstration samples and frame origins.
  double workspace_diameter() const;
};

/// M = 4 pick-place demos in the (x, z) plane with box positions varied per demo
/// horizontally and every box at the same height.
Scenario generate_scenario(ScenarioKind kind, std::uint64_t seed);

}  // namespace tpkmp
