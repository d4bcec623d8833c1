#include "afkit/loss.hpp"

#include <algorithm>
#include <cmath>

#include "afkit/common.hpp"
#include "afkit/metrics.hpp"

namespace afkit {

namespace {
constexpr double kLogEps = 1e-12;
constexpr double kLogRelFloor = 1e-3;  // -30 dB: far beyond any useful residual
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "log_power") return LossKind::LogPower;
  if (s == "log_mse") return LossKind::LogMse;
  if (s == "neg_si_sdr") return LossKind::NegSiSdr;
  throw ConfigError("unknown loss: " + s + " (want log_power, log_mse, or neg_si_sdr)");
}

const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::LogPower: return "log_power";
    case LossKind::LogMse: return "log_mse";
    default: return "neg_si_sdr";
  }
}

double log_power_loss(const std::vector<double>& out, std::vector<double>* grad) {
  if (out.empty()) throw ConfigError("loss: empty segment");
  const double n = static_cast<double>(out.size());
  const double mean = energy(out) / n;
  if (grad) {
    grad->assign(out.size(), 0.0);
    const double scale = 2.0 / (n * (mean + kLogEps));
    for (std::size_t i = 0; i < out.size(); ++i) (*grad)[i] = scale * out[i];
  }
  return std::log(mean + kLogEps);
}

double log_mse_loss(const std::vector<double>& out, const std::vector<double>& ref,
                    std::vector<double>* grad) {
  if (out.empty()) throw ConfigError("loss: empty segment");
  if (ref.size() != out.size()) throw ConfigError("loss: reference length mismatch");
  const double n = static_cast<double>(out.size());
  double mean = 0.0, ref_pow = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double r = out[i] - ref[i];
    mean += r * r;
    ref_pow += ref[i] * ref[i];
  }
  mean /= n;
  ref_pow /= n;
  // Floor the log argument relative to the reference level. Segments where
  // the residual already sits 30 dB under the reference (source pauses, easy
  // stretches) otherwise produce near-singular 1/mse gradients that drown
  // the rest of the batch.
  const double floor = kLogRelFloor * ref_pow + kLogEps;
  if (grad) {
    grad->assign(out.size(), 0.0);
    const double scale = 2.0 / (n * (mean + floor));
    for (std::size_t i = 0; i < out.size(); ++i) (*grad)[i] = scale * (out[i] - ref[i]);
  }
  return std::log(mean + floor);
}

double neg_si_sdr_loss(const std::vector<double>& out, const std::vector<double>& ref,
                       std::vector<double>* grad) {
  if (out.empty()) throw ConfigError("loss: empty segment");
  if (ref.size() != out.size()) throw ConfigError("loss: reference length mismatch");
  if (grad) grad->assign(out.size(), 0.0);

  double rr = 0.0, orr = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    rr += ref[i] * ref[i];
    orr += out[i] * ref[i];
  }
  if (rr <= 0.0) return kMetricCapDb;  // no reference energy, capped and flat

  const double alpha = orr / rr;
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double t = alpha * ref[i];
    sig += t * t;
    const double r = out[i] - t;
    err += r * r;
  }
  double sdr;
  if (sig <= 0.0)
    sdr = -kMetricCapDb;
  else if (err <= 0.0)
    sdr = kMetricCapDb;
  else
    sdr = std::clamp(db_pow(sig / err), -kMetricCapDb, kMetricCapDb);

  // The gradient is zero in the capped regions.
  if (grad && sdr > -kMetricCapDb && sdr < kMetricCapDb) {
    // d/d(out_i) of -10*log10(sig/err); the projection residual is orthogonal
    // to ref, so d(err) reduces to the residual itself.
    const double c = 10.0 / std::log(10.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double resid = out[i] - alpha * ref[i];
      (*grad)[i] = -c * (2.0 * alpha * ref[i] / sig - 2.0 * resid / err);
    }
  }
  return -sdr;
}

double segment_loss(LossKind kind, const std::vector<double>& out,
                    const std::vector<double>& ref, std::vector<double>* grad) {
  switch (kind) {
    case LossKind::LogPower: return log_power_loss(out, grad);
    case LossKind::LogMse: return log_mse_loss(out, ref, grad);
    default: return neg_si_sdr_loss(out, ref, grad);
  }
}

}  // namespace afkit
