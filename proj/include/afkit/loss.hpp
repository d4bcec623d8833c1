#pragma once

#include <string>
#include <vector>

namespace afkit {

// Segment losses for controller training. Each returns the scalar value and,
// when grad is non-null, overwrites it with d(loss)/d(out).
enum class LossKind {
  LogPower,  // log mean square of the output itself (self-supervised)
  LogMse,    // log mean square error against a reference signal
  NegSiSdr,  // negated scale-invariant SDR against a reference
};

LossKind parse_loss_kind(const std::string& s);
const char* loss_kind_name(LossKind k);

double log_power_loss(const std::vector<double>& out, std::vector<double>* grad);
double log_mse_loss(const std::vector<double>& out, const std::vector<double>& ref,
                    std::vector<double>* grad);
double neg_si_sdr_loss(const std::vector<double>& out, const std::vector<double>& ref,
                       std::vector<double>* grad);

// Dispatcher; ref may be empty for LogPower.
double segment_loss(LossKind kind, const std::vector<double>& out,
                    const std::vector<double>& ref, std::vector<double>* grad);

}  // namespace afkit
