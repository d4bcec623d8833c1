#pragma once

#include <cstddef>
#include <vector>

#include "afkit/common.hpp"

namespace afkit {

// What an optimizer sees for one adaptation step. Spectra are row-major.
struct OptimInput {
  const cplx* taps = nullptr;   // regressor spectra the filter applied, [t_count x k]
  const cplx* input = nullptr;  // per-bin scalar summary of the filter input, [k]
  const cplx* err = nullptr;    // a priori error spectrum, [k]
  std::size_t t_count = 0;
  std::size_t k = 0;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // Adjusts theta ([t_count x k]) in place from the observed error.
  virtual void step(std::vector<cplx>& theta, const OptimInput& in) = 0;
  virtual void reset() = 0;
  // Flat snapshot of internal state; restore accepts exactly what save produced.
  virtual std::vector<double> save_state() const = 0;
  virtual void restore_state(const std::vector<double>& s) = 0;
};

// Leaves the filter exactly as constructed; used for static-filter oracles
// and frozen baselines.
class FrozenOptimizer : public Optimizer {
 public:
  void step(std::vector<cplx>&, const OptimInput&) override {}
  void reset() override {}
  std::vector<double> save_state() const override { return {}; }
  void restore_state(const std::vector<double>& s) override {
    if (!s.empty()) throw ConfigError("frozen optimizer carries no state");
  }
};

struct NlmsConfig {
  double step_size = 0.5;
  double eps = 1e-6;
  // Floors each bin's normalizer at this fraction of a slow running average
  // of the whole-frame tap energy, so near-silent stretches cannot launch the
  // weights. Zero gives the textbook update; the floor keeps the update
  // scale-invariant either way.
  double energy_floor = 0.3;
  double energy_alpha = 0.05;  // per-step smoothing of that average
};

// Per-bin normalized LMS across all taps sharing one energy denominator.
class NlmsOptimizer : public Optimizer {
 public:
  NlmsOptimizer(NlmsConfig cfg, std::size_t t_count, std::size_t k);
  void step(std::vector<cplx>& theta, const OptimInput& in) override;
  void reset() override { avg_energy_ = 0.0; }
  std::vector<double> save_state() const override { return {avg_energy_}; }
  void restore_state(const std::vector<double>& s) override;

 private:
  NlmsConfig cfg_;
  std::size_t t_, k_;
  double avg_energy_ = 0.0;
};

struct KalmanConfig {
  double transition = 0.999;  // state decay per frame
  double q_min = 1e-10;       // process noise floor
  double psi_keep = 0.9;      // observation-noise EMA retention; 1.0 freezes it
  double p_init = 1.0;
  double psi_init = 1e-6;
};

// Diagonal frequency-domain Kalman filter: one variance per tap, one shared
// observation-noise track per bin, gains coupled through a common innovation
// denominator.
class KalmanOptimizer : public Optimizer {
 public:
  KalmanOptimizer(KalmanConfig cfg, std::size_t t_count, std::size_t k);
  void step(std::vector<cplx>& theta, const OptimInput& in) override;
  void reset() override;
  std::vector<double> save_state() const override;
  void restore_state(const std::vector<double>& s) override;

 private:
  KalmanConfig cfg_;
  std::size_t t_, k_;
  std::vector<double> p_;    // [t x k] per-tap state variance
  std::vector<double> psi_;  // [k] observation noise estimate
};

struct RlsConfig {
  double forget = 0.99;
  double delta = 1e-2;  // initial inverse-correlation scale: P0 = I/delta
};

// Exact recursive least squares per bin over the tap vector. Keeps the
// inverse correlation matrix Hermitian and reinitializes a bin if numerical
// drift destroys positive definiteness.
class RlsOptimizer : public Optimizer {
 public:
  RlsOptimizer(RlsConfig cfg, std::size_t t_count, std::size_t k);
  void step(std::vector<cplx>& theta, const OptimInput& in) override;
  void reset() override;
  std::vector<double> save_state() const override;
  void restore_state(const std::vector<double>& s) override;

 private:
  void init_bin(std::size_t k);
  RlsConfig cfg_;
  std::size_t t_, k_;
  std::vector<cplx> pinv_;  // [k x t x t] inverse correlation per bin
  std::vector<cplx> px_;    // scratch [t]
};

}  // namespace afkit
