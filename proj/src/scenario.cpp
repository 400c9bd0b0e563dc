#include "tpkmp/scenario.hpp"

#include <algorithm>
#include <random>

#include "tpkmp/errors.hpp"

namespace tpkmp {

namespace {

Vec xz(double x, double z) {
  Vec v(2);
  v << x, z;
  return v;
}

double quintic(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

FramePose box_at(double x, double z) { return FramePose(xz(x, z), Mat::Identity(2, 2)); }

}  // namespace

std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::pick_place: return "pick_place";
    case ScenarioKind::height_generalization: return "height_generalization";
    case ScenarioKind::new_frame: return "new_frame";
    case ScenarioKind::extension: return "extension";
  }
  return "pick_place";
}

ScenarioKind scenario_kind_from_string(const std::string& name) {
  if (name == "pick_place") return ScenarioKind::pick_place;
  if (name == "height_generalization") return ScenarioKind::height_generalization;
  if (name == "new_frame") return ScenarioKind::new_frame;
  if (name == "extension") return ScenarioKind::extension;
  throw ValidationError("unknown scenario kind '" + name + "'");
}

bool box_collision(const BoxGeometry& box, const FramePose& pose, const Vec& x) {
  const Vec l = project_to_frame(x, pose);
  const double floor = -box.grasp_height;
  const double half = 0.5 * box.inner_width;
  const double outer = half + box.wall;
  const double h = std::abs(l(0));
  if (l(1) < floor - box.wall || h > outer) return false;
  if (l(1) < floor) return true;                                // floor slab
  return h >= half && l(1) <= floor + box.wall_height;          // side walls
}

Vec PickPlaceShape::at(const Vec& b1, const Vec& b2, double s) const {
  const Vec up1 = b1 + xz(0.0, lift);
  const Vec up2 = b2 + xz(0.0, lift);
  if (s <= t_up) return b1 + quintic(s / t_up) * (up1 - b1);
  if (s <= t_down) return up1 + quintic((s - t_up) / (t_down - t_up)) * (up2 - up1);
  return up2 + quintic((s - t_down) / (1.0 - t_down)) * (b2 - up2);
}

double Scenario::workspace_diameter() const {
  Vec lo = Vec::Constant(2, std::numeric_limits<double>::infinity());
  Vec hi = -lo;
  const auto grow = [&](const Vec& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  };
  for (const auto& d : demos) {
    for (Index h = 0; h < d.length(); ++h) grow(d.outputs.row(h).transpose());
    for (const auto& f : d.frames) grow(f.origin());
  }
  return (hi - lo).norm();
}

Scenario generate_scenario(ScenarioKind kind, std::uint64_t seed) {
  Scenario sc;
  sc.kind = kind;
  sc.name = to_string(kind);
  sc.seed = seed;
  sc.frame_labels = {"box1", "box2"};
  sc.train.components = 12;
  sc.train.inputs = 500;
  sc.train.seed = seed;
  sc.train.labels = sc.frame_labels;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, sc.noise);
  constexpr int kDemos = 4;
  constexpr Index kSamples = 200;
  for (int m = 0; m < kDemos; ++m) {
    const Vec b1 = xz(0.2 + 0.04 * u(rng), 0.0);
    const Vec b2 = xz(0.7 + 0.06 * u(rng), 0.0);
    PickPlaceShape shape = sc.shape;
    shape.lift += 0.01 * u(rng);
    shape.t_up += 0.02 * u(rng);
    shape.t_down += 0.02 * u(rng);
    Demonstration d;
    d.inputs = make_inputs(kSamples, 1.0);
    d.outputs.resize(kSamples, 2);
    for (Index h = 0; h < kSamples; ++h) {
      const Vec p = shape.at(b1, b2, d.inputs[h]);
      d.outputs(h, 0) = p(0) + noise(rng);
      d.outputs(h, 1) = p(1) + noise(rng);
    }
    d.duration_s = sc.duration_scale;
    d.frames = {box_at(b1(0), b1(1)), box_at(b2(0), b2(1))};
    sc.demos.push_back(std::move(d));
  }

  switch (kind) {
    case ScenarioKind::pick_place:
      for (const auto& d : sc.demos) sc.eval_frames.push_back(d.frames);
      sc.correction_frames = sc.demos.front().frames;
      break;
    case ScenarioKind::height_generalization:
      // box 2 lowered below the demonstrated height: 5 placements x 3 depths
      for (double depth : {0.02, 0.05, 0.16}) {
        for (double x : {0.60, 0.65, 0.70, 0.75, 0.80}) sc.eval_frames.push_back({box_at(0.2, 0.0), box_at(x, -depth)});
      }
      sc.correction_frames = {box_at(0.2, 0.0), box_at(0.7, -0.16)};
      break;
    case ScenarioKind::new_frame: {
      sc.frame_labels.push_back("camera");
      sc.trigger.mode = TriggerMode::button;
      const auto cam = [](double x, double z, double a) { return FramePose::planar(xz(x, z), a); };
      sc.correction_frames = {box_at(0.2, 0.0), box_at(0.7, 0.0), cam(0.45, 0.30, 0.0)};
      for (const auto& c : {cam(0.40, 0.28, 0.0), cam(0.50, 0.33, 0.0), cam(0.45, 0.26, 0.2), cam(0.48, 0.31, -0.2),
                            cam(0.42, 0.32, 0.1)}) {
        sc.eval_frames.push_back({box_at(0.2, 0.0), box_at(0.7, 0.0), c});
      }
      break;
    }
    case ScenarioKind::extension:
      sc.trigger.mode = TriggerMode::distance;
      sc.s_end = 1.3;
      sc.correction_frames = {box_at(0.2, 0.0), box_at(0.7, 0.0)};
      sc.eval_frames.push_back(sc.correction_frames);
      break;
  }
  return sc;
}

}  // namespace tpkmp
