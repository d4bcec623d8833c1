#include "afkit/flops.hpp"

#include <cmath>

namespace afkit {

namespace {

constexpr double kMac = 8.0;

// Filter passes and optimizer invocations per frame for each schedule.
std::size_t passes(StepMode m) {
  switch (m) {
    case StepMode::Predict: return 2;            // synthesis pair only
    case StepMode::PredictUpdate: return 3;      // + refreshed estimate
    case StepMode::PredictUpdateTwice: return 4; // + intermediate error
  }
  return 2;
}

std::size_t opt_calls(StepMode m) { return m == StepMode::PredictUpdateTwice ? 2 : 1; }

}  // namespace

double transform_flops(std::size_t n) {
  return 5.0 * static_cast<double>(n) * std::log2(static_cast<double>(n));
}

double net_flops_per_step(const NetConfig& cfg) {
  const double h = static_cast<double>(cfg.hidden);
  const double per_band = h * static_cast<double>(cfg.in_width())  // down projection
                          + 12.0 * h * h                           // two recurrent cells
                          + static_cast<double>(cfg.out_width()) * h;  // up projection
  return kMac * per_band * static_cast<double>(cfg.bands());
}

double encode_flops(const NetConfig& cfg) {
  return kMac * static_cast<double>(cfg.bins) * static_cast<double>(cfg.features());
}

double optimizer_flops_per_step(OptimizerKind kind, std::size_t taps, std::size_t bins,
                                const NetConfig* net) {
  const double t = static_cast<double>(taps);
  const double k = static_cast<double>(bins);
  switch (kind) {
    case OptimizerKind::Frozen: return 0.0;
    case OptimizerKind::Nlms: return kMac * 2.0 * t * k;    // norm + update
    case OptimizerKind::Kalman: return kMac * 6.0 * t * k;  // predict/gain/update/cov
    case OptimizerKind::Rls: return kMac * (2.0 * t * t + t) * k;
    case OptimizerKind::Net:
      if (!net) throw ConfigError("flops: learned optimizer needs a net config");
      return net_flops_per_step(*net);
  }
  return 0.0;
}

double aec_flops_per_frame(const MdfConfig& cfg, StepMode mode, OptimizerKind kind,
                           const NetConfig* net) {
  const double k = static_cast<double>(cfg.bins());
  double total = 4.0 * transform_flops(cfg.frame.n);  // two forward, two inverse
  total += static_cast<double>(passes(mode)) * kMac * static_cast<double>(cfg.blocks) * k;
  const double calls = static_cast<double>(opt_calls(mode));
  total += calls * optimizer_flops_per_step(kind, cfg.blocks, cfg.bins(), net);
  if (kind == OptimizerKind::Net) total += calls * encode_flops(*net);
  return total;
}

double gsc_flops_per_frame(const GscConfig& cfg, StepMode mode, OptimizerKind kind,
                           const NetConfig* net) {
  const double k = static_cast<double>(cfg.bins());
  const double m = static_cast<double>(cfg.mics);
  double total = (m + 2.0) * transform_flops(cfg.frame.n);  // mic forwards, two inverses
  total += kMac * 2.0 * m * k;  // fixed beam projection and blocking per frame
  total += static_cast<double>(passes(mode)) * kMac * m * k;
  const double calls = static_cast<double>(opt_calls(mode));
  total += calls * optimizer_flops_per_step(kind, cfg.mics, cfg.bins(), net);
  if (kind == OptimizerKind::Net) total += calls * encode_flops(*net);
  return total;
}

double flops_per_second(double per_frame, const FrameConfig& frame, unsigned sample_rate) {
  frame.validate();
  return per_frame * static_cast<double>(sample_rate) / static_cast<double>(frame.hop);
}

}  // namespace afkit
