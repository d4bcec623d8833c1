#pragma once

#include <vector>

#include "afkit/common.hpp"

namespace afkit {

// Periodic Hann: w[i] = 0.5 * (1 - cos(tau*i/n)). At 50% overlap adjacent
// windows sum to 1, which is what makes the synthesis chain an identity for
// a passthrough filter.
std::vector<double> hann_periodic(std::size_t n);

// Sliding analysis buffer. Each push shifts the previous n - hop samples left
// and appends exactly hop new ones; frame() is always the latest n samples.
class FrameBuffer {
 public:
  explicit FrameBuffer(const FrameConfig& fc) : fc_(fc), buf_(fc.n, 0.0) { fc.validate(); }

  void push(const double* chunk, std::size_t len);
  void push(const std::vector<double>& chunk) { push(chunk.data(), chunk.size()); }

  const std::vector<double>& frame() const { return buf_; }
  void reset() { std::fill(buf_.begin(), buf_.end(), 0.0); }

  std::vector<double>& raw() { return buf_; }  // for state snapshots
  const std::vector<double>& raw() const { return buf_; }

 private:
  FrameConfig fc_;
  std::vector<double> buf_;
};

// Windowed overlap-add synthesis. Applies the periodic Hann to a full output
// frame, accumulates into the overlap tail, and emits hop finished samples.
class OlaSynth {
 public:
  explicit OlaSynth(const FrameConfig& fc)
      : fc_(fc), win_(hann_periodic(fc.n)), tail_(fc.n - fc.hop, 0.0) {}

  std::vector<double> synthesize(const std::vector<double>& frame);

  const std::vector<double>& window() const { return win_; }
  std::vector<double>& tail() { return tail_; }
  const std::vector<double>& tail() const { return tail_; }
  void reset() { std::fill(tail_.begin(), tail_.end(), 0.0); }

 private:
  FrameConfig fc_;
  std::vector<double> win_;
  std::vector<double> tail_;
};

}  // namespace afkit
