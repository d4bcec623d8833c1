#pragma once

#include <memory>
#include <string>
#include <vector>

#include "afkit/fft.hpp"
#include "afkit/filters.hpp"
#include "afkit/frames.hpp"
#include "afkit/optim.hpp"

namespace afkit {

// How much work one frame gets. Predict runs the optimizer after the output
// is formed, so the frame is synthesized with the incoming weights;
// the update modes re-filter with the freshest weights before synthesis, and
// the two-step mode inserts a second optimizer pass on the refreshed error.
enum class StepMode { Predict, PredictUpdate, PredictUpdateTwice };

StepMode parse_step_mode(const std::string& s);
const char* step_mode_name(StepMode m);

// Streaming echo canceller: block-partitioned frequency-domain filter over
// the far-end feed, synthesized by windowed overlap-add of the current-chunk
// estimate and the previous-chunk re-estimate. Output trails input by one hop.
class EchoCanceller {
 public:
  EchoCanceller(const MdfConfig& cfg, std::unique_ptr<Optimizer> opt, StepMode mode);

  // Consumes one hop of far-end u and near-end d, appends hop output samples.
  // Returns false when the non-finite guard tripped and the frame's
  // adaptation was rolled back.
  bool process_chunk(const double* u, const double* d, std::vector<double>& out);

  // Whole-signal helper; inputs must share a length divisible by the hop.
  std::vector<double> process(const std::vector<double>& u, const std::vector<double>& d);

  const std::vector<cplx>& weights() const { return theta_; }
  void set_weights(const std::vector<cplx>& theta);
  Optimizer& optimizer() { return *opt_; }
  const MdfConfig& config() const { return cfg_; }
  StepMode mode() const { return mode_; }
  std::size_t frames() const { return frames_; }
  std::size_t rejected_frames() const { return rejected_; }

  void save_state(const std::string& path) const;
  void load_state(const std::string& path);

 private:
  MdfConfig cfg_;
  std::unique_ptr<Optimizer> opt_;
  StepMode mode_;
  Fft fft_;
  FrameBuffer ubuf_, dbuf_;
  SpecDelayLine dline_;
  OlaSynth synth_;
  std::vector<cplx> theta_;
  std::vector<cplx> taps_;  // delay line flattened in offset order for the optimizer
  std::size_t frames_ = 0, rejected_ = 0;
};

// Streaming sidelobe canceller: fixed delay-and-sum beam plus an adaptive
// subtraction of the blocked channels, same synthesis scheme as the echo
// canceller.
class Beamformer {
 public:
  Beamformer(const GscConfig& cfg, double doa_deg, std::unique_ptr<Optimizer> opt,
             StepMode mode);

  // mics[m] points at one hop of samples for channel m.
  bool process_chunk(const double* const* mics, std::vector<double>& out);
  std::vector<double> process(const std::vector<std::vector<double>>& mics);

  const std::vector<cplx>& weights() const { return theta_; }
  Optimizer& optimizer() { return *opt_; }
  const GscConfig& config() const { return cfg_; }
  std::size_t frames() const { return frames_; }
  std::size_t rejected_frames() const { return rejected_; }

  void save_state(const std::string& path) const;
  void load_state(const std::string& path);

 private:
  GscConfig cfg_;
  double doa_deg_;
  std::unique_ptr<Optimizer> opt_;
  StepMode mode_;
  Fft fft_;
  std::vector<FrameBuffer> bufs_;
  OlaSynth synth_;
  std::vector<cplx> steer_;
  std::vector<cplx> theta_;
  GscFrame prev_;  // previous analysis frame for the re-estimate pass
  std::size_t frames_ = 0, rejected_ = 0;
};

}  // namespace afkit
