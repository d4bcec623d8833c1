#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "afkit/filters.hpp"
#include "afkit/frames.hpp"
#include "afkit/loss.hpp"
#include "afkit/net.hpp"
#include "afkit/scenes.hpp"
#include "afkit/stream.hpp"

namespace afkit {

// Gradient training for the learned controller. The segment forward pass
// mirrors the runtime engines operation for operation (the bit-match test
// pins this), records a tape, and the reverse sweep hand-propagates adjoints
// through synthesis, the transforms, the filter, and the controller.
// Backpropagation truncates at segment boundaries: carried-in filter weights,
// hidden state, and buffers are treated as constants.

struct SegmentOptions {
  StepMode mode = StepMode::PredictUpdate;
  LossKind loss = LossKind::LogMse;
  // When false, the last frame skips any optimizer step that runs after
  // synthesis (it only matters for stream continuation, never for this
  // segment's loss).
  bool final_update = true;
};

// Stream state carried across segments of one utterance (echo plant).
struct AecTrainState {
  AecTrainState(const MdfConfig& cfg, const NetConfig& net);
  FrameBuffer ubuf, dbuf;
  SpecDelayLine dline;
  OlaSynth synth;
  std::vector<cplx> theta;
  std::vector<double> hidden;
};

// Same for the beamformer plant; the steering vector is fixed per utterance.
struct GscTrainState {
  GscTrainState(const GscConfig& cfg, double doa_deg, const NetConfig& net);
  std::vector<FrameBuffer> bufs;
  OlaSynth synth;
  std::vector<cplx> steer;
  GscFrame prev;
  std::vector<cplx> theta;
  std::vector<double> hidden;
};

// Runs `frames` hops of u/d (frames*hop samples each), scores the emitted
// audio against ref (same length; ignored by LogPower), and accumulates
// d(loss)/d(params) into param_grad unless it is null (forward only).
// Returns the loss; emitted receives the output chunk stream when non-null.
// State advances in place and is ready for the following segment.
double aec_segment_grad(const MdfConfig& cfg, const NetConfig& net,
                        const std::vector<double>& params, const SegmentOptions& opt,
                        AecTrainState& state, const double* u, const double* d,
                        const double* ref, std::size_t frames, double* param_grad,
                        std::vector<double>* emitted = nullptr);

double gsc_segment_grad(const GscConfig& cfg, const NetConfig& net,
                        const std::vector<double>& params, const SegmentOptions& opt,
                        GscTrainState& state, const double* const* mics,
                        const double* ref, std::size_t frames, double* param_grad,
                        std::vector<double>* emitted = nullptr);

// ---- optimizer over parameters ----

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9, beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const AdamConfig& cfg, std::size_t n);
  void step(std::vector<double>& params, const std::vector<double>& grad);
  double& lr() { return cfg_.lr; }
  double lr() const { return cfg_.lr; }
  std::size_t steps() const { return t_; }
  std::vector<double> save_state() const;  // [t, lr, m..., v...]
  void restore_state(const std::vector<double>& s);

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

// ---- full training loops ----

struct TrainSchedule {
  std::size_t scenes = 2000;   // virtual dataset size (seed-regenerated)
  std::size_t epochs = 8;
  std::size_t batch = 16;      // utterances advanced in lockstep per step
  std::size_t seg_min = 8, seg_max = 128;  // segment length draw, in frames
  AdamConfig adam;
  double clip = 5.0;                 // global gradient norm
  std::size_t plateau_patience = 10;  // stagnant epochs before halving lr
  std::size_t stop_patience = 30;  // stagnant epochs before giving up
  std::uint64_t seed = 1;
  std::string csv_path;         // per-epoch log, empty to skip
  std::string checkpoint_path;  // best-so-far weights, empty to skip
  // Sidecar of an earlier run to continue from: restores the optimizer
  // moments and best parameters, appends to the log, and resumes the epoch
  // numbering. Empty for a fresh run.
  std::string resume_path;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  double best_loss = 0.0;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
  bool diverged = false;
};

TrainReport train_echo_controller(const MdfConfig& filter, const NetConfig& net,
                                  const SegmentOptions& opt, const AecSceneParams& scene,
                                  const TrainSchedule& sched, std::vector<double>& params);

TrainReport train_beam_controller(const GscConfig& array, const NetConfig& net,
                                  const SegmentOptions& opt, const GscSceneParams& scene,
                                  const TrainSchedule& sched, std::vector<double>& params);

// Sidecar for resuming a run: optimizer moments, step counts, and the best
// parameters so far.
void save_train_state(const std::string& path, const Adam& adam, std::size_t epoch,
                      std::size_t stall, double best_loss,
                      const std::vector<double>& best_params);
struct TrainResume {
  std::vector<double> adam_state;
  std::size_t epoch = 0, stall = 0;
  double best_loss = 0.0;
  std::vector<double> best_params;
};
TrainResume load_train_state(const std::string& path);

}  // namespace afkit
