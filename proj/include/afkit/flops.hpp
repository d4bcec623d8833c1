#pragma once

#include <cstddef>

#include "afkit/filters.hpp"
#include "afkit/net.hpp"
#include "afkit/stream.hpp"

namespace afkit {

// Analytic per-frame cost model, used for complexity reporting and the
// regression thresholds in the acceptance run. Conventions, applied
// uniformly so ratios between configurations are meaningful:
//   - one multiply-accumulate counts as 8 flops (complex rate, charged even
//     for real MACs to keep a single currency)
//   - one length-n transform counts as 5 * n * log2(n) flops
//   - each compander evaluation in the controller feature path counts as one
//     MAC; the compander is charged to the pipeline, not to the controller,
//     so controller-only ratios compare the networks themselves

enum class OptimizerKind { Frozen, Nlms, Kalman, Rls, Net };

double transform_flops(std::size_t n);

// Controller network proper: band projections plus both recurrent cells,
// summed over bands.
double net_flops_per_step(const NetConfig& cfg);

// Feature compander over all bins.
double encode_flops(const NetConfig& cfg);

// One optimizer invocation for a taps-by-bins weight sheet.
double optimizer_flops_per_step(OptimizerKind kind, std::size_t taps, std::size_t bins,
                                const NetConfig* net);

double aec_flops_per_frame(const MdfConfig& cfg, StepMode mode, OptimizerKind kind,
                           const NetConfig* net);
double gsc_flops_per_frame(const GscConfig& cfg, StepMode mode, OptimizerKind kind,
                           const NetConfig* net);

double flops_per_second(double per_frame, const FrameConfig& frame, unsigned sample_rate);

}  // namespace afkit
