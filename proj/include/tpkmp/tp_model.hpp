#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tpkmp/gaussian.hpp"
#include "tpkmp/gmm.hpp"
#include "tpkmp/kmp.hpp"

namespace tpkmp {

enum class ViaSource { force, distance, button, manual };
std::string to_string(ViaSource s);
ViaSource via_source_from_string(const std::string& name);

/// {s, mu, Sigma}. Global coordinates unless frame_index is set.
struct ViaPoint {
  double s = 0.0;
  Vec mu;
  Mat sigma;
  std::optional<std::size_t> frame_index;
  ViaSource source = ViaSource::manual;
};

/// One object frame with its locally trained KMP. `base` is the GMR (or
/// placeholder) reference; `via_points` are local-frame insertions in the order
/// they were applied. `kmp` is always base + via_points.
struct LocalKmp {
  std::string label;
  FramePose frame;
  ReferenceDistribution base;
  std::vector<ViaPoint> via_points;
  Kmp kmp;
};

/// Builds the KMP of a local model from its base and via-points (one factorization).
LocalKmp make_local(std::string label, FramePose frame, ReferenceDistribution base,
                    std::vector<ViaPoint> via_points, const KernelConfig& kernel, const KmpHyper& hyper);

struct TpModel {
  std::vector<LocalKmp> locals;
  KernelConfig kernel;
  KmpHyper hyper;
  double s_max = 1.0;

  std::size_t size() const noexcept { return locals.size(); }
  Index output_dim() const { return locals.front().kmp.output_dim(); }
  std::vector<FramePose> frames() const;
  void validate() const;
};

struct TrainConfig {
  int components = 12;
  Index inputs = 500;
  std::uint64_t seed = 0;
  KernelConfig kernel;
  KmpHyper hyper;
  EmOptions em;
  std::vector<std::string> labels;  // defaults to frame0, frame1, ...
};

/// Demo samples expressed in frame p of each demo.
std::vector<Demonstration> project_demos(std::span<const Demonstration> demos, std::size_t p);

/// One GMM per frame on the projected demos, all with cfg.seed.
std::vector<GaussianMixture> fit_local_mixtures(std::span<const Demonstration> demos, const TrainConfig& cfg);

/// Projects every demo into each of its frames, fits a GMM per frame, and builds
/// one local KMP per frame from GMR on make_inputs(N, 1). Each demo carries its own
/// frame poses; the stored pose of a local model is the first demo's.
TpModel train(std::span<const Demonstration> demos, const TrainConfig& cfg);

struct FusedPrediction {
  Vec mean;
  Mat cov;
  Mat cov_ep;
  Mat cov_al;
  /// Local predictions mapped to global coordinates, one per frame.
  std::vector<Prediction> per_frame;
};

/// Maps each local prediction to global coordinates with its current pose and
/// fuses them: totals by the Gaussian product, and the epistemic and aleatoric
/// parts each fused by the same precision-weighted rule among themselves.
FusedPrediction fuse(std::span<const Prediction> local, std::span<const FramePose> frames,
                     double signal_variance = 1.0);

FusedPrediction fused_predict(const TpModel& model, double s, std::span<const FramePose> frames);

/// table[p][i] = local prediction of frame p at queries[i]. Independent of frame poses.
std::vector<std::vector<Prediction>> local_predictions(const TpModel& model, std::span<const double> queries,
                                                       Exec exec = Exec::parallel);

/// Fuses a precomputed local table for one set of frame poses.
std::vector<FusedPrediction> fuse_table(const TpModel& model, const std::vector<std::vector<Prediction>>& table,
                                        std::span<const FramePose> frames, Exec exec = Exec::parallel);

std::vector<FusedPrediction> fused_predict_batch(const TpModel& model, std::span<const double> queries,
                                                 std::span<const FramePose> frames, Exec exec = Exec::parallel);

enum class TriggerMode { force, distance, button };
std::string to_string(TriggerMode m);
TriggerMode trigger_mode_from_string(const std::string& name);

struct TriggerConfig {
  TriggerMode mode = TriggerMode::force;
  double gamma_F = 20.0;
  double gamma_xi = 0.2;
  double gamma_Sigma = 1e-8;
  double debounce = 0.02;

  void validate() const;
};

bool check_trigger(const TriggerConfig& cfg, const Vec& desired, const Vec& actual, const Vec& force, bool button);

/// argmin_p |mu - b_p|, ties to the lowest index.
std::size_t nearest_frame(const Vec& mu, std::span<const FramePose> frames);

/// Local-frame copy of a global via-point: mu -> A^{-1}(mu - b), Sigma -> A^{-1} Sigma A^{-T}.
ViaPoint to_local(const ViaPoint& global, const FramePose& frame, std::size_t index);

/// Routes a global via-point to `target` (or the nearest frame), maps it locally
/// and inserts it. Only that local KMP is touched; it is left stale when
/// `rebuild` is false. Returns the frame index.
std::size_t insert_correction(TpModel& model, const ViaPoint& global, std::span<const FramePose> frames,
                              std::optional<std::size_t> target = std::nullopt, bool rebuild = true);

/// insert_correction on a copy; the input snapshot is untouched.
TpModel apply_correction(const TpModel& model, const ViaPoint& global, std::span<const FramePose> frames,
                         std::optional<std::size_t> target = std::nullopt);

/// Rebuilds every local KMP with a stale cache.
void rebuild_stale(TpModel& model);

/// Appends a placeholder local model at `pose`: same base inputs as the other
/// frames, zero means, covariance gamma_D * I.
TpModel add_placeholder_frame(const TpModel& model, const FramePose& pose, double gamma_D,
                              std::string label = {});

struct StreamSample {
  double t = 0.0;  // normalized input
  Vec desired;
  Vec actual;
  Vec force;
  bool button = false;
};

/// Incremental trigger -> global via-point -> nearest frame -> local mapping.
/// Via-points are routed and mapped with the frame poses current at trigger time
/// and held until commit(), which inserts them and rebuilds each touched KMP once.
class CorrectionRecorder {
 public:
  explicit CorrectionRecorder(TriggerConfig cfg);

  /// Returns the global via-point created by this sample, if any.
  std::optional<ViaPoint> observe(const StreamSample& sample, std::span<const FramePose> frames);

  /// Global via-points waiting for commit, frame_index set to the routed frame.
  const std::vector<ViaPoint>& pending() const noexcept { return global_; }

  /// Inserts all pending via-points into `model`; returns them and clears the queue.
  std::vector<ViaPoint> commit(TpModel& model);

  const TriggerConfig& config() const noexcept { return cfg_; }

 private:
  TriggerConfig cfg_;
  std::optional<double> last_;
  std::vector<ViaPoint> global_;
  std::vector<ViaPoint> local_;
};

struct Algorithm1Result {
  TpModel model;
  std::vector<ViaPoint> via_points;
};

Algorithm1Result run_algorithm1(const TpModel& model, const TriggerConfig& cfg, std::span<const StreamSample> stream,
                                std::span<const FramePose> frames);

}  // namespace tpkmp
