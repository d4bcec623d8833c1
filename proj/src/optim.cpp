#include "afkit/optim.hpp"

#include <algorithm>
#include <cmath>

namespace afkit {
namespace {

void check_shapes(const std::vector<cplx>& theta, const OptimInput& in, std::size_t t,
                  std::size_t k) {
  if (in.t_count != t || in.k != k) throw ConfigError("optimizer input shape mismatch");
  if (theta.size() != t * k) throw ConfigError("optimizer weight shape mismatch");
  if (!in.taps || !in.err) throw ConfigError("optimizer input missing spectra");
}

}  // namespace

NlmsOptimizer::NlmsOptimizer(NlmsConfig cfg, std::size_t t_count, std::size_t k)
    : cfg_(cfg), t_(t_count), k_(k) {
  if (cfg.step_size <= 0.0 || cfg.eps < 0.0 || cfg.energy_floor < 0.0 ||
      cfg.energy_alpha <= 0.0 || cfg.energy_alpha > 1.0)
    throw ConfigError("bad nlms config");
}

void NlmsOptimizer::step(std::vector<cplx>& theta, const OptimInput& in) {
  check_shapes(theta, in, t_, k_);
  double frame = 0.0;
  for (std::size_t i = 0; i < t_ * k_; ++i) frame += std::norm(in.taps[i]);
  frame /= static_cast<double>(k_);
  avg_energy_ = avg_energy_ <= 0.0
                    ? frame
                    : (1.0 - cfg_.energy_alpha) * avg_energy_ + cfg_.energy_alpha * frame;
  const double floor = cfg_.energy_floor * avg_energy_ + cfg_.eps;
  for (std::size_t j = 0; j < k_; ++j) {
    double denom = floor;
    for (std::size_t b = 0; b < t_; ++b) denom += std::norm(in.taps[b * k_ + j]);
    if (denom <= 0.0) continue;
    const cplx scaled = (cfg_.step_size / denom) * in.err[j];
    for (std::size_t b = 0; b < t_; ++b)
      theta[b * k_ + j] += std::conj(in.taps[b * k_ + j]) * scaled;
  }
}

void NlmsOptimizer::restore_state(const std::vector<double>& s) {
  if (s.empty()) {
    avg_energy_ = 0.0;
  } else if (s.size() == 1) {
    avg_energy_ = s[0];
  } else {
    throw ConfigError("nlms state is a single running energy");
  }
}

KalmanOptimizer::KalmanOptimizer(KalmanConfig cfg, std::size_t t_count, std::size_t k)
    : cfg_(cfg), t_(t_count), k_(k) {
  if (cfg.transition <= 0.0 || cfg.transition > 1.0 || cfg.psi_keep < 0.0 ||
      cfg.psi_keep > 1.0 || cfg.p_init <= 0.0)
    throw ConfigError("bad kalman config");
  reset();
}

void KalmanOptimizer::reset() {
  p_.assign(t_ * k_, cfg_.p_init);
  psi_.assign(k_, cfg_.psi_init);
}

void KalmanOptimizer::step(std::vector<cplx>& theta, const OptimInput& in) {
  check_shapes(theta, in, t_, k_);
  const double a = cfg_.transition, a2 = a * a;
  for (std::size_t j = 0; j < k_; ++j) {
    // Predict: decay the state, grow uncertainty in proportion to |theta|^2.
    double denom = psi_[j];
    for (std::size_t b = 0; b < t_; ++b) {
      const std::size_t i = b * k_ + j;
      const double q = (1.0 - a2) * std::norm(theta[i]) + cfg_.q_min;
      theta[i] *= a;
      p_[i] = a2 * p_[i] + q;
      denom += std::norm(in.taps[i]) * p_[i];
    }
    denom = std::max(denom, 1e-30);  // silence guard
    // Correct: shared innovation denominator, per-tap gain.
    const cplx err = in.err[j];
    for (std::size_t b = 0; b < t_; ++b) {
      const std::size_t i = b * k_ + j;
      const double pu = p_[i] * std::norm(in.taps[i]) / denom;
      theta[i] += (p_[i] / denom) * std::conj(in.taps[i]) * err;
      p_[i] *= 1.0 - pu;
    }
    psi_[j] = cfg_.psi_keep * psi_[j] + (1.0 - cfg_.psi_keep) * std::norm(err);
  }
}

std::vector<double> KalmanOptimizer::save_state() const {
  std::vector<double> out;
  out.reserve(p_.size() + psi_.size());
  out.insert(out.end(), p_.begin(), p_.end());
  out.insert(out.end(), psi_.begin(), psi_.end());
  return out;
}

void KalmanOptimizer::restore_state(const std::vector<double>& s) {
  if (s.size() != p_.size() + psi_.size()) throw ConfigError("kalman state size mismatch");
  std::copy(s.begin(), s.begin() + long(p_.size()), p_.begin());
  std::copy(s.begin() + long(p_.size()), s.end(), psi_.begin());
}

RlsOptimizer::RlsOptimizer(RlsConfig cfg, std::size_t t_count, std::size_t k)
    : cfg_(cfg), t_(t_count), k_(k) {
  if (cfg.forget <= 0.0 || cfg.forget > 1.0 || cfg.delta <= 0.0)
    throw ConfigError("bad rls config");
  pinv_.resize(k_ * t_ * t_);
  px_.resize(t_);
  reset();
}

void RlsOptimizer::init_bin(std::size_t j) {
  cplx* m = pinv_.data() + j * t_ * t_;
  std::fill(m, m + t_ * t_, cplx(0.0, 0.0));
  for (std::size_t b = 0; b < t_; ++b) m[b * t_ + b] = cplx(1.0 / cfg_.delta, 0.0);
}

void RlsOptimizer::reset() {
  for (std::size_t j = 0; j < k_; ++j) init_bin(j);
}

void RlsOptimizer::step(std::vector<cplx>& theta, const OptimInput& in) {
  check_shapes(theta, in, t_, k_);
  const double g = cfg_.forget;
  for (std::size_t j = 0; j < k_; ++j) {
    cplx* m = pinv_.data() + j * t_ * t_;
    // Regressor enters conjugated so the normal equations match y = theta^T z.
    // px = P x, denom = forget + x^H P x (real for Hermitian P).
    double quad = 0.0;
    for (std::size_t r = 0; r < t_; ++r) {
      cplx acc(0.0, 0.0);
      for (std::size_t c = 0; c < t_; ++c)
        acc += m[r * t_ + c] * std::conj(in.taps[c * k_ + j]);
      px_[r] = acc;
      quad += (in.taps[r * k_ + j] * acc).real();  // conj(x_r) * px_r
    }
    const double denom = g + quad;
    if (!(denom > 0.0) || !std::isfinite(denom)) {
      init_bin(j);  // lost positive definiteness, start the bin over
      continue;
    }
    for (std::size_t r = 0; r < t_; ++r) {
      const cplx gain = px_[r] / denom;
      theta[r * k_ + j] += gain * in.err[j];
      for (std::size_t c = 0; c < t_; ++c)
        m[r * t_ + c] = (m[r * t_ + c] - gain * std::conj(px_[c])) / g;
    }
    // Re-symmetrize to keep drift from accumulating.
    for (std::size_t r = 0; r < t_; ++r) {
      m[r * t_ + r] = cplx(m[r * t_ + r].real(), 0.0);
      for (std::size_t c = r + 1; c < t_; ++c) {
        const cplx avg = 0.5 * (m[r * t_ + c] + std::conj(m[c * t_ + r]));
        m[r * t_ + c] = avg;
        m[c * t_ + r] = std::conj(avg);
      }
    }
    bool ok = true;
    for (std::size_t r = 0; r < t_; ++r) {
      const double d = m[r * t_ + r].real();
      if (!(d > 0.0) || !std::isfinite(d)) ok = false;
    }
    if (!ok) init_bin(j);
  }
}

std::vector<double> RlsOptimizer::save_state() const {
  std::vector<double> out;
  out.reserve(2 * pinv_.size());
  for (const cplx& v : pinv_) {
    out.push_back(v.real());
    out.push_back(v.imag());
  }
  return out;
}

void RlsOptimizer::restore_state(const std::vector<double>& s) {
  if (s.size() != 2 * pinv_.size()) throw ConfigError("rls state size mismatch");
  for (std::size_t i = 0; i < pinv_.size(); ++i) pinv_[i] = cplx(s[2 * i], s[2 * i + 1]);
}

}  // namespace afkit
