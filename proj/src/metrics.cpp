#include "afkit/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace afkit {

namespace {

double capped_ratio_db(double num, double den) {
  if (den <= 0.0) return num <= 0.0 ? 0.0 : kMetricCapDb;
  if (num <= 0.0) return -kMetricCapDb;
  return std::clamp(db_pow(num / den), -kMetricCapDb, kMetricCapDb);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

double erle_db(const std::vector<double>& mic, const std::vector<double>& out,
               std::size_t frame, double gate_db) {
  if (mic.size() != out.size()) throw ConfigError("erle: length mismatch");
  if (frame == 0) throw ConfigError("erle: zero frame");
  const std::size_t frames = mic.size() / frame;  // trailing partial frame ignored
  std::vector<double> fe(frames, 0.0);
  double peak = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = f * frame; i < (f + 1) * frame; ++i) fe[f] += mic[i] * mic[i];
    peak = std::max(peak, fe[f]);
  }
  const double gate = peak * std::pow(10.0, -gate_db / 10.0);
  double num = 0.0, den = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    if (fe[f] < gate) continue;
    num += fe[f];
    for (std::size_t i = f * frame; i < (f + 1) * frame; ++i) den += out[i] * out[i];
  }
  return capped_ratio_db(num, den);
}

double erle_masked_db(const std::vector<double>& mic, const std::vector<double>& out,
                      const std::vector<std::uint8_t>& mask, std::size_t frame) {
  if (mic.size() != out.size() || mic.size() != mask.size())
    throw ConfigError("erle: length mismatch");
  if (frame == 0) throw ConfigError("erle: zero frame");
  const std::size_t frames = mic.size() / frame;
  double num = 0.0, den = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    std::size_t on = 0;
    for (std::size_t i = f * frame; i < (f + 1) * frame; ++i) on += mask[i];
    if (2 * on <= frame) continue;
    for (std::size_t i = f * frame; i < (f + 1) * frame; ++i) {
      num += mic[i] * mic[i];
      den += out[i] * out[i];
    }
  }
  return capped_ratio_db(num, den);
}

double si_sdr_db(const std::vector<double>& ref, const std::vector<double>& est) {
  if (ref.size() != est.size()) throw ConfigError("si_sdr: length mismatch");
  if (ref.empty()) throw ConfigError("si_sdr: empty");
  const double rr = dot(ref, ref);
  if (rr <= 0.0) return -kMetricCapDb;
  const double alpha = dot(est, ref) / rr;
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double t = alpha * ref[i];
    sig += t * t;
    const double r = est[i] - t;
    err += r * r;
  }
  if (sig <= 0.0) return -kMetricCapDb;  // nothing of the reference survived
  return capped_ratio_db(sig, err);
}

SirSar sir_sar_db(const std::vector<double>& est, const std::vector<double>& target_ref,
                  const std::vector<double>& interf_ref) {
  if (est.size() != target_ref.size() || est.size() != interf_ref.size())
    throw ConfigError("sir_sar: length mismatch");
  if (est.empty()) throw ConfigError("sir_sar: empty");
  const double tt = dot(target_ref, target_ref);
  const double ii = dot(interf_ref, interf_ref);
  const double at = tt > 0.0 ? dot(est, target_ref) / tt : 0.0;
  const double ai = ii > 0.0 ? dot(est, interf_ref) / ii : 0.0;
  double pt = 0.0, pi = 0.0, pb = 0.0, pa = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double st = at * target_ref[i];
    const double si = ai * interf_ref[i];
    pt += st * st;
    pi += si * si;
    pb += (st + si) * (st + si);
    const double a = est[i] - st - si;
    pa += a * a;
  }
  return {capped_ratio_db(pt, pi), capped_ratio_db(pb, pa)};
}

std::vector<double> delayed(const std::vector<double>& x, std::size_t lag) {
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = lag; i < x.size(); ++i) out[i] = x[i - lag];
  return out;
}

}  // namespace afkit
