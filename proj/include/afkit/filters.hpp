#pragma once

#include <vector>

#include "afkit/common.hpp"
#include "afkit/fft.hpp"

namespace afkit {

// ---- multidelay acoustic echo filter -------------------------------------

struct MdfConfig {
  FrameConfig frame;
  std::size_t blocks = 8;  // delay-line depth in hops
  std::size_t bins() const { return frame.bins(); }
  std::size_t weights() const { return blocks * bins(); }
};

// Ring of one-sided input spectra, newest first. Depth exceeds the block
// count by one so the previous-chunk re-estimate used at synthesis can read
// one hop further back.
class SpecDelayLine {
 public:
  SpecDelayLine(std::size_t depth, std::size_t bins)
      : depth_(depth), bins_(bins), data_(depth * bins, cplx(0.0, 0.0)) {}

  void push(const std::vector<cplx>& spec) {
    if (spec.size() != bins_) throw ConfigError("delay line bin mismatch");
    head_ = (head_ + depth_ - 1) % depth_;
    std::copy(spec.begin(), spec.end(), data_.begin() + static_cast<std::ptrdiff_t>(head_ * bins_));
  }
  // d hops back (0 = newest)
  const cplx* at(std::size_t d) const { return data_.data() + ((head_ + d) % depth_) * bins_; }
  std::size_t depth() const { return depth_; }
  std::size_t bins() const { return bins_; }
  void reset() { std::fill(data_.begin(), data_.end(), cplx(0.0, 0.0)); head_ = 0; }

  std::vector<cplx>& raw() { return data_; }
  const std::vector<cplx>& raw() const { return data_; }
  std::size_t& head() { return head_; }
  std::size_t head() const { return head_; }

 private:
  std::size_t depth_, bins_;
  std::size_t head_ = 0;
  std::vector<cplx> data_;
};

// y_k = sum_b theta[b,k] * U[b+delay_off, k]. theta is row-major [blocks x bins].
void mdf_estimate(const std::vector<cplx>& theta, std::size_t blocks, const SpecDelayLine& u,
                  std::size_t delay_off, std::vector<cplx>* y_out);

// e = d - y with y as above.
std::vector<cplx> mdf_error(const std::vector<cplx>& theta, std::size_t blocks,
                            const SpecDelayLine& u, std::size_t delay_off,
                            const std::vector<cplx>& d_spec);

// Block-partitioned transform of a time-domain impulse response: block b is
// taps [b*hop, (b+1)*hop) zero-padded to the frame length. The remainder past
// blocks*hop is dropped.
std::vector<cplx> partition_ir(const std::vector<double>& ir, const MdfConfig& cfg);

// ---- generalized sidelobe canceller ---------------------------------------

struct GscConfig {
  FrameConfig frame;
  std::size_t mics = 4;
  double spacing_m = 0.04;
  double speed_of_sound = 343.0;
  unsigned sample_rate = 16000;
  std::size_t bins() const { return frame.bins(); }
  std::size_t weights() const { return mics * bins(); }
};

// Far-field steering phases for a uniform linear array, delays referenced to
// the array center so |v| = 1 per bin and v^H v = M.
std::vector<cplx> steering_vector(const GscConfig& cfg, double doa_deg);

// Per-mic fractional delays in samples for the same geometry (scene synthesis
// uses these so the steering vector matches the simulated wavefront).
std::vector<double> mic_delays_samples(const GscConfig& cfg, double doa_deg);

struct GscFrame {
  std::vector<cplx> fixed_beam;  // K: v^H U / M
  std::vector<cplx> blocked;     // M*K row-major: (I - v v^H / M) U
  std::vector<cplx> blocked_mean;  // K: channel mean of blocked, optimizer summary input
};

GscFrame gsc_analyze(const std::vector<cplx>& mic_specs /* M*K */, const std::vector<cplx>& v,
                     std::size_t mics);

// e_k = fixed_beam_k - theta[:,k]^T blocked[:,k]. The canceller weights are
// kept unconjugated so every adaptive plant here shares the same update
// convention; it spans the same solution set as the conjugated form.
std::vector<cplx> gsc_output(const GscFrame& fr, const std::vector<cplx>& theta, std::size_t mics);

}  // namespace afkit
