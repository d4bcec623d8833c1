#include "afkit/filters.hpp"

#include <cmath>

namespace afkit {

void mdf_estimate(const std::vector<cplx>& theta, std::size_t blocks, const SpecDelayLine& u,
                  std::size_t delay_off, std::vector<cplx>* y_out) {
  const std::size_t k = u.bins();
  if (theta.size() != blocks * k) throw ConfigError("mdf weight shape mismatch");
  if (delay_off + blocks > u.depth()) throw ConfigError("mdf delay line too shallow");
  y_out->assign(k, cplx(0.0, 0.0));
  for (std::size_t b = 0; b < blocks; ++b) {
    const cplx* ub = u.at(b + delay_off);
    const cplx* tb = theta.data() + b * k;
    cplx* y = y_out->data();
    for (std::size_t i = 0; i < k; ++i) y[i] += tb[i] * ub[i];
  }
}

std::vector<cplx> mdf_error(const std::vector<cplx>& theta, std::size_t blocks,
                            const SpecDelayLine& u, std::size_t delay_off,
                            const std::vector<cplx>& d_spec) {
  std::vector<cplx> y;
  mdf_estimate(theta, blocks, u, delay_off, &y);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = d_spec[i] - y[i];
  return y;
}

std::vector<cplx> partition_ir(const std::vector<double>& ir, const MdfConfig& cfg) {
  const std::size_t hop = cfg.frame.hop, n = cfg.frame.n, k = cfg.bins();
  Fft fft(n);
  std::vector<cplx> theta(cfg.blocks * k, cplx(0.0, 0.0));
  std::vector<double> seg(n);
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    std::fill(seg.begin(), seg.end(), 0.0);
    for (std::size_t i = 0; i < hop; ++i) {
      const std::size_t t = b * hop + i;
      if (t < ir.size()) seg[i] = ir[t];
    }
    auto spec = fft.rfft(seg);
    std::copy(spec.begin(), spec.end(), theta.begin() + static_cast<std::ptrdiff_t>(b * k));
  }
  return theta;
}

std::vector<double> mic_delays_samples(const GscConfig& cfg, double doa_deg) {
  const double rad = doa_deg * 3.14159265358979323846 / 180.0;
  const double center = 0.5 * static_cast<double>(cfg.mics - 1);
  std::vector<double> d(cfg.mics);
  for (std::size_t m = 0; m < cfg.mics; ++m) {
    const double offset = (static_cast<double>(m) - center) * cfg.spacing_m;
    d[m] = offset * std::sin(rad) / cfg.speed_of_sound * static_cast<double>(cfg.sample_rate);
  }
  return d;
}

std::vector<cplx> steering_vector(const GscConfig& cfg, double doa_deg) {
  const std::size_t k = cfg.bins(), n = cfg.frame.n;
  const auto delays = mic_delays_samples(cfg, doa_deg);
  std::vector<cplx> v(cfg.mics * k);
  constexpr double kTau = 6.283185307179586476925286766559;
  for (std::size_t m = 0; m < cfg.mics; ++m)
    for (std::size_t j = 0; j < k; ++j) {
      const double ang = -kTau * static_cast<double>(j) / static_cast<double>(n) * delays[m];
      v[m * k + j] = cplx(std::cos(ang), std::sin(ang));
    }
  return v;
}

GscFrame gsc_analyze(const std::vector<cplx>& mic_specs, const std::vector<cplx>& v,
                     std::size_t mics) {
  if (mic_specs.size() != v.size() || mic_specs.size() % mics != 0)
    throw ConfigError("gsc mic/steering shape mismatch");
  const std::size_t k = mic_specs.size() / mics;
  GscFrame fr;
  fr.fixed_beam.assign(k, cplx(0.0, 0.0));
  fr.blocked.assign(mics * k, cplx(0.0, 0.0));
  fr.blocked_mean.assign(k, cplx(0.0, 0.0));
  const double inv_m = 1.0 / static_cast<double>(mics);
  for (std::size_t j = 0; j < k; ++j) {
    cplx proj(0.0, 0.0);
    for (std::size_t m = 0; m < mics; ++m) proj += std::conj(v[m * k + j]) * mic_specs[m * k + j];
    proj *= inv_m;  // (v^H U) / M
    fr.fixed_beam[j] = proj;
    cplx mean(0.0, 0.0);
    for (std::size_t m = 0; m < mics; ++m) {
      const cplx z = mic_specs[m * k + j] - v[m * k + j] * proj;
      fr.blocked[m * k + j] = z;
      mean += z;
    }
    fr.blocked_mean[j] = mean * inv_m;
  }
  return fr;
}

std::vector<cplx> gsc_output(const GscFrame& fr, const std::vector<cplx>& theta,
                             std::size_t mics) {
  const std::size_t k = fr.fixed_beam.size();
  if (theta.size() != mics * k) throw ConfigError("gsc weight shape mismatch");
  std::vector<cplx> e(fr.fixed_beam);
  for (std::size_t m = 0; m < mics; ++m) {
    const cplx* tm = theta.data() + m * k;
    const cplx* zm = fr.blocked.data() + m * k;
    for (std::size_t j = 0; j < k; ++j) e[j] -= tm[j] * zm[j];
  }
  return e;
}

}  // namespace afkit
