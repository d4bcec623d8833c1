#pragma once

#include <cstdint>
#include <vector>

#include "afkit/common.hpp"

namespace afkit {

// All level metrics are clamped to +/- this bound so perfect or empty
// reconstructions stay finite.
inline constexpr double kMetricCapDb = 100.0;

// Echo-return-loss enhancement 10*log10(sum d^2 / sum e^2), accumulated over
// frames whose mic energy is within gate_db of the loudest frame. The gate
// keeps silent stretches from diluting the ratio.
double erle_db(const std::vector<double>& mic, const std::vector<double>& out,
               std::size_t frame = 256, double gate_db = 40.0);

// Same ratio, but a frame counts only when more than half of its samples are
// flagged in `mask` (ground-truth gating, e.g. echo active and near end
// silent).
double erle_masked_db(const std::vector<double>& mic, const std::vector<double>& out,
                      const std::vector<std::uint8_t>& mask, std::size_t frame = 256);

// Scale-invariant signal-to-distortion ratio of est against ref.
double si_sdr_db(const std::vector<double>& ref, const std::vector<double>& est);

// Interference and artifact ratios from independent 1-D projections of est
// onto the two references: whatever correlates with target_ref is signal,
// whatever correlates with interf_ref is leaked interference, the remainder
// is artifact.
struct SirSar {
  double sir_db;
  double sar_db;
};
SirSar sir_sar_db(const std::vector<double>& est, const std::vector<double>& target_ref,
                  const std::vector<double>& interf_ref);

// x delayed by lag samples, zero-padded at the front, same length.
std::vector<double> delayed(const std::vector<double>& x, std::size_t lag);

}  // namespace afkit
