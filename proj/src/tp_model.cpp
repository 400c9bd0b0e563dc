#include "tpkmp/tp_model.hpp"

#include <algorithm>
#include <limits>
#include <cmath>

#include "tpkmp/errors.hpp"

namespace tpkmp {

namespace {

constexpr double kSplitFloor = 1e-14;

RefEntry entry_of(const ViaPoint& vp) { return RefEntry{vp.s, vp.mu, vp.sigma}; }

void check_frames(const TpModel& model, std::span<const FramePose> frames) {
  if (frames.size() != model.size()) {
    throw DimensionError("expected " + std::to_string(model.size()) + " frame poses, got " +
                         std::to_string(frames.size()));
  }
  for (const auto& f : frames) {
    if (f.dim() != model.output_dim()) throw DimensionError("frame dimension does not match model output");
  }
}

void check_via_point(const ViaPoint& vp, Index dim) {
  if (vp.mu.size() != dim || vp.sigma.rows() != dim || vp.sigma.cols() != dim) {
    throw DimensionError("via-point dimension does not match model output");
  }
  if (!std::isfinite(vp.s) || vp.s < 0.0) throw ValidationError("via-point input must be finite and >= 0");
}

Prediction to_global(const Prediction& p, const FramePose& f) {
  return Prediction{map_point_to_global(p.mean, f), map_cov_to_global(p.cov, f), map_cov_to_global(p.cov_ep, f),
                    map_cov_to_global(p.cov_al, f)};
}

}  // namespace

std::string to_string(ViaSource s) {
  switch (s) {
    case ViaSource::force: return "force";
    case ViaSource::distance: return "distance";
    case ViaSource::button: return "button";
    case ViaSource::manual: return "manual";
  }
  return "manual";
}

ViaSource via_source_from_string(const std::string& name) {
  if (name == "force") return ViaSource::force;
  if (name == "distance") return ViaSource::distance;
  if (name == "button") return ViaSource::button;
  if (name == "manual") return ViaSource::manual;
  throw ValidationError("unknown via-point source '" + name + "'");
}

std::string to_string(TriggerMode m) {
  switch (m) {
    case TriggerMode::force: return "force";
    case TriggerMode::distance: return "distance";
    case TriggerMode::button: return "button";
  }
  return "force";
}

TriggerMode trigger_mode_from_string(const std::string& name) {
  if (name == "force") return TriggerMode::force;
  if (name == "distance") return TriggerMode::distance;
  if (name == "button") return TriggerMode::button;
  throw ValidationError("unknown trigger mode '" + name + "'");
}

LocalKmp make_local(std::string label, FramePose frame, ReferenceDistribution base, std::vector<ViaPoint> via_points,
                    const KernelConfig& kernel, const KmpHyper& hyper) {
  base.validate();
  const double radius = default_replace_radius(base);
  Kmp kmp(base, kernel, hyper, radius, false);
  for (const auto& vp : via_points) {
    check_via_point(vp, base.output_dim());
    kmp.insert_via_point(entry_of(vp));
  }
  kmp.rebuild();
  return LocalKmp{std::move(label), std::move(frame), std::move(base), std::move(via_points), std::move(kmp)};
}

std::vector<FramePose> TpModel::frames() const {
  std::vector<FramePose> out;
  out.reserve(locals.size());
  for (const auto& l : locals) out.push_back(l.frame);
  return out;
}

void TpModel::validate() const {
  if (locals.empty()) throw EmptyData("model has no local frames");
  kernel.validate();
  hyper.validate();
  const Index o = output_dim();
  const auto& grid = locals.front().base.entries;
  for (const auto& l : locals) {
    if (l.kmp.output_dim() != o || l.frame.dim() != o) throw DimensionError("local models disagree on dimension");
    if (l.base.entries.size() != grid.size()) throw ValidationError("local models must share input grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (l.base.entries[i].s != grid[i].s) throw ValidationError("local models must share input grid");
    }
  }
  if (!(s_max > 0.0)) throw ValidationError("s_max must be positive");
}

std::vector<Demonstration> project_demos(std::span<const Demonstration> demos, std::size_t p) {
  std::vector<Demonstration> local;
  local.reserve(demos.size());
  for (const auto& d : demos) {
    if (p >= d.frames.size()) throw ValidationError("frame index out of range");
    Demonstration l{d.inputs, Mat(d.outputs.rows(), d.outputs.cols()), d.duration_s, {}};
    for (Index h = 0; h < d.length(); ++h) {
      l.outputs.row(h) = project_to_frame(d.outputs.row(h).transpose(), d.frames[p]).transpose();
    }
    local.push_back(std::move(l));
  }
  return local;
}

std::vector<GaussianMixture> fit_local_mixtures(std::span<const Demonstration> demos, const TrainConfig& cfg) {
  if (demos.empty()) throw EmptyData("no demonstrations");
  cfg.kernel.validate();
  cfg.hyper.validate();
  const std::size_t p_count = demos.front().frames.size();
  if (p_count == 0) throw ValidationError("demonstrations carry no frames");
  for (const auto& d : demos) {
    d.validate();
    if (d.frames.size() != p_count) throw ValidationError("demonstrations disagree on frame count");
    if (d.output_dim() != demos.front().output_dim()) throw DimensionError("demonstrations disagree on dimension");
  }
  if (!cfg.labels.empty() && cfg.labels.size() != p_count) throw ValidationError("label count != frame count");
  std::vector<GaussianMixture> out;
  for (std::size_t p = 0; p < p_count; ++p) {
    out.push_back(fit_gmm(project_demos(demos, p), cfg.components, cfg.seed, cfg.em).mixture);
  }
  return out;
}

TpModel train(std::span<const Demonstration> demos, const TrainConfig& cfg) {
  const auto mixtures = fit_local_mixtures(demos, cfg);
  const auto queries = make_inputs(cfg.inputs, 1.0);
  TpModel model;
  model.kernel = cfg.kernel;
  model.hyper = cfg.hyper;
  model.s_max = 1.0;
  for (std::size_t p = 0; p < mixtures.size(); ++p) {
    auto ref = gmr(mixtures[p], queries);
    std::string label = cfg.labels.empty() ? "frame" + std::to_string(p) : cfg.labels[p];
    model.locals.push_back(make_local(std::move(label), demos.front().frames[p], std::move(ref), {}, cfg.kernel,
                                      cfg.hyper));
  }
  return model;
}

FusedPrediction fuse(std::span<const Prediction> local, std::span<const FramePose> frames, double signal_variance) {
  if (local.empty() || local.size() != frames.size()) throw DimensionError("prediction/frame count mismatch");
  FusedPrediction out;
  out.per_frame.reserve(local.size());
  for (std::size_t p = 0; p < local.size(); ++p) out.per_frame.push_back(to_global(local[p], frames[p]));
  if (local.size() == 1) {
    const auto& g = out.per_frame.front();
    out.mean = g.mean;
    out.cov = g.cov;
    out.cov_ep = g.cov_ep;
    out.cov_al = g.cov_al;
    return out;
  }
  const double floor = kSplitFloor * signal_variance;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<Gaussian> totals;
  std::vector<Mat> ep, al;
  totals.reserve(local.size());
  for (const auto& g : out.per_frame) {
    totals.emplace_back(g.mean, clamp_eigenvalues(g.cov, floor, inf));
    ep.push_back(clamp_eigenvalues(g.cov_ep, floor, inf));
    al.push_back(clamp_eigenvalues(g.cov_al, floor, inf));
  }
  const Gaussian prod = gaussian_product(totals);
  out.mean = prod.mean();
  out.cov = prod.cov();
  out.cov_ep = fuse_covariances(ep);
  out.cov_al = fuse_covariances(al);
  return out;
}

FusedPrediction fused_predict(const TpModel& model, double s, std::span<const FramePose> frames) {
  check_frames(model, frames);
  std::vector<Prediction> local;
  local.reserve(model.size());
  for (const auto& l : model.locals) local.push_back(l.kmp.predict(s));
  return fuse(local, frames, model.kernel.signal_variance);
}

std::vector<std::vector<Prediction>> local_predictions(const TpModel& model, std::span<const double> queries,
                                                       Exec exec) {
  std::vector<std::vector<Prediction>> table;
  table.reserve(model.size());
  for (const auto& l : model.locals) table.push_back(l.kmp.predict_batch(queries, exec));
  return table;
}

std::vector<FusedPrediction> fuse_table(const TpModel& model, const std::vector<std::vector<Prediction>>& table,
                                        std::span<const FramePose> frames, Exec exec) {
  check_frames(model, frames);
  if (table.size() != model.size()) throw DimensionError("table does not match model frames");
  const std::size_t q = table.front().size();
  for (const auto& t : table) {
    if (t.size() != q) throw DimensionError("ragged prediction table");
  }
  std::vector<FusedPrediction> out(q);
  const double s2 = model.kernel.signal_variance;
  const auto body = [&](std::size_t i) {
    std::vector<Prediction> local;
    local.reserve(table.size());
    for (const auto& t : table) local.push_back(t[i]);
    out[i] = fuse(local, frames, s2);
  };
  const auto n = static_cast<long>(q);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) body(static_cast<std::size_t>(i));
  } else {
    for (long i = 0; i < n; ++i) body(static_cast<std::size_t>(i));
  }
  return out;
}

std::vector<FusedPrediction> fused_predict_batch(const TpModel& model, std::span<const double> queries,
                                                 std::span<const FramePose> frames, Exec exec) {
  check_frames(model, frames);
  return fuse_table(model, local_predictions(model, queries, exec), frames, exec);
}

void TriggerConfig::validate() const {
  if (!(gamma_F > 0.0)) throw ValidationError("gamma_F must be positive");
  if (!(gamma_xi > 0.0)) throw ValidationError("gamma_xi must be positive");
  if (!(gamma_Sigma > 0.0)) throw ValidationError("gamma_Sigma must be positive");
  if (!(debounce >= 0.0)) throw ValidationError("debounce must be non-negative");
}

bool check_trigger(const TriggerConfig& cfg, const Vec& desired, const Vec& actual, const Vec& force, bool button) {
  switch (cfg.mode) {
    case TriggerMode::force: return force.norm() > cfg.gamma_F;
    case TriggerMode::distance:
      if (desired.size() != actual.size()) throw DimensionError("desired/actual dimension mismatch");
      return (actual - desired).norm() > cfg.gamma_xi;
    case TriggerMode::button: return button;
  }
  return false;
}

std::size_t nearest_frame(const Vec& mu, std::span<const FramePose> frames) {
  if (frames.empty()) throw EmptyData("no frames to route to");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < frames.size(); ++p) {
    if (frames[p].dim() != mu.size()) throw DimensionError("frame dimension does not match via-point");
    const double d = (mu - frames[p].origin()).norm();
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

ViaPoint to_local(const ViaPoint& global, const FramePose& frame, std::size_t index) {
  const Gaussian g = map_to_local(Gaussian(global.mu, global.sigma), frame);
  return ViaPoint{global.s, g.mean(), g.cov(), index, global.source};
}

std::size_t insert_correction(TpModel& model, const ViaPoint& global, std::span<const FramePose> frames,
                              std::optional<std::size_t> target, bool rebuild) {
  check_frames(model, frames);
  check_via_point(global, model.output_dim());
  const std::size_t p = target ? *target : nearest_frame(global.mu, frames);
  if (p >= model.size()) throw ValidationError("target frame index out of range");
  const ViaPoint local = to_local(global, frames[p], p);
  auto& l = model.locals[p];
  l.kmp.insert_via_point(entry_of(local));
  l.via_points.push_back(local);
  if (rebuild) l.kmp.rebuild();
  model.s_max = std::max(model.s_max, global.s);
  return p;
}

TpModel apply_correction(const TpModel& model, const ViaPoint& global, std::span<const FramePose> frames,
                         std::optional<std::size_t> target) {
  TpModel out = model;
  insert_correction(out, global, frames, target, true);
  return out;
}

void rebuild_stale(TpModel& model) {
  for (auto& l : model.locals) {
    if (!l.kmp.cache_valid()) l.kmp.rebuild();
  }
}

TpModel add_placeholder_frame(const TpModel& model, const FramePose& pose, double gamma_D, std::string label) {
  if (model.locals.empty()) throw EmptyData("model has no local frames");
  if (!(gamma_D >= 1.0)) throw ValidationError("gamma_D must be >= 1");
  const Index o = model.output_dim();
  if (pose.dim() != o) throw DimensionError("placeholder pose dimension does not match model");
  ReferenceDistribution base;
  base.entries.reserve(model.locals.front().base.entries.size());
  for (const auto& e : model.locals.front().base.entries) {
    base.entries.push_back(RefEntry{e.s, Vec::Zero(o), gamma_D * Mat::Identity(o, o)});
  }
  TpModel out = model;
  if (label.empty()) label = "frame" + std::to_string(model.size());
  out.locals.push_back(make_local(std::move(label), pose, std::move(base), {}, model.kernel, model.hyper));
  return out;
}

CorrectionRecorder::CorrectionRecorder(TriggerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::optional<ViaPoint> CorrectionRecorder::observe(const StreamSample& sample, std::span<const FramePose> frames) {
  if (!check_trigger(cfg_, sample.desired, sample.actual, sample.force, sample.button)) return std::nullopt;
  if (last_ && sample.t - *last_ < cfg_.debounce) return std::nullopt;
  const Index o = sample.actual.size();
  ViaSource src = ViaSource::force;
  if (cfg_.mode == TriggerMode::distance) src = ViaSource::distance;
  if (cfg_.mode == TriggerMode::button) src = ViaSource::button;
  ViaPoint g{sample.t, sample.actual, cfg_.gamma_Sigma * Mat::Identity(o, o), std::nullopt, src};
  const std::size_t p = nearest_frame(g.mu, frames);
  g.frame_index = p;
  local_.push_back(to_local(g, frames[p], p));
  global_.push_back(g);
  last_ = sample.t;
  return g;
}

std::vector<ViaPoint> CorrectionRecorder::commit(TpModel& model) {
  for (const auto& l : local_) {
    const std::size_t p = *l.frame_index;
    if (p >= model.size()) throw ValidationError("routed frame index out of range");
    check_via_point(l, model.output_dim());
    model.locals[p].kmp.insert_via_point(entry_of(l));
    model.locals[p].via_points.push_back(l);
    model.s_max = std::max(model.s_max, l.s);
  }
  rebuild_stale(model);
  std::vector<ViaPoint> out = std::move(global_);
  global_.clear();
  local_.clear();
  return out;
}

Algorithm1Result run_algorithm1(const TpModel& model, const TriggerConfig& cfg, std::span<const StreamSample> stream,
                                std::span<const FramePose> frames) {
  check_frames(model, frames);
  CorrectionRecorder rec(cfg);
  for (const auto& sample : stream) rec.observe(sample, frames);
  Algorithm1Result out{model, {}};
  out.via_points = rec.commit(out.model);
  return out;
}

}  // namespace tpkmp
