#include "afkit/frames.hpp"

#include <algorithm>
#include <cmath>

namespace afkit {

std::vector<double> hann_periodic(std::size_t n) {
  std::vector<double> w(n);
  constexpr double kTau = 6.283185307179586476925286766559;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(kTau * static_cast<double>(i) / static_cast<double>(n)));
  return w;
}

void FrameBuffer::push(const double* chunk, std::size_t len) {
  if (len != fc_.hop) throw ConfigError("push size must equal the hop");
  const std::size_t keep = fc_.n - fc_.hop;
  std::copy(buf_.begin() + static_cast<std::ptrdiff_t>(fc_.hop), buf_.end(), buf_.begin());
  std::copy(chunk, chunk + len, buf_.begin() + static_cast<std::ptrdiff_t>(keep));
}

std::vector<double> OlaSynth::synthesize(const std::vector<double>& frame) {
  const std::size_t n = fc_.n, hop = fc_.hop, keep = n - hop;
  if (frame.size() != n) throw ConfigError("synthesis frame length mismatch");
  std::vector<double> acc(n);
  for (std::size_t i = 0; i < n; ++i) acc[i] = win_[i] * frame[i];
  for (std::size_t i = 0; i < keep; ++i) acc[i] += tail_[i];
  std::vector<double> out(acc.begin(), acc.begin() + static_cast<std::ptrdiff_t>(hop));
  std::copy(acc.begin() + static_cast<std::ptrdiff_t>(hop), acc.end(), tail_.begin());
  return out;
}

}  // namespace afkit
