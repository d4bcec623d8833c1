#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "afkit/common.hpp"
#include "afkit/optim.hpp"

namespace afkit {

// Banded recurrent controller that proposes per-tap weight updates. The
// spectrum is split into disjoint bands of `band` bins; every band runs the
// same small network (shared weights) with its own hidden state.
struct NetConfig {
  std::size_t hidden = 32;  // recurrent width
  std::size_t taps = 8;     // filter taps per bin the controller sees/updates
  std::size_t bins = 257;
  std::size_t band = 5;  // bins per band; the tail band is zero-padded

  std::size_t bands() const { return (bins + band - 1) / band; }
  // Encoded reals per bin: input summary + error + taps, re/im each.
  std::size_t features() const { return 2 * (2 + taps); }
  std::size_t in_width() const { return band * features(); }
  std::size_t out_width() const { return band * 2 * taps; }
  std::size_t hidden_size() const { return 2 * bands() * hidden; }
  std::size_t param_count() const;
  void validate() const;
};

// Offsets of the named tensors inside the flat parameter vector. Matrices
// are row-major [rows x cols]; a GRU cell packs input kernels, recurrent
// kernels, then biases, gate order r, z, n throughout.
struct GruOffsets {
  std::size_t wr, wz, wn;  // [hidden x in]
  std::size_t ur, uz, un;  // [hidden x hidden]
  std::size_t br, bz, bn;  // [hidden]
};

struct ParamOffsets {
  std::size_t down_w, down_b;  // [hidden x in_width], [hidden]
  GruOffsets gru1, gru2;       // both cells take hidden-wide inputs
  std::size_t up_w, up_b;      // [out_width x hidden], [out_width]
  std::size_t total;
};

ParamOffsets param_offsets(const NetConfig& cfg);

// Deterministic init: orthogonal recurrent kernels, uniform fan-in input
// kernels, zero biases, and a deliberately small output kernel so early
// updates barely move the filter.
std::vector<double> init_params(const NetConfig& cfg, std::uint64_t seed);

// Everything a backward sweep needs from one step that is cheaper to store
// than recompute. All arrays are [bands x hidden].
struct NetTrace {
  std::vector<double> a0;                        // band input projection
  std::vector<double> h1_in, h1_out, h2_in, h2_out;
  std::vector<double> r1, z1, n1, un1;           // cell 1 gates, Un*h product
  std::vector<double> r2, z2, n2, un2;
  void resize(const NetConfig& cfg);
};

// One controller step: reads (input, err, theta), adds the proposed update to
// theta, advances hidden in place. `trace` may be null.
void net_step(const NetConfig& cfg, const double* params, const cplx* input,
              const cplx* err, std::vector<cplx>& theta, double* hidden,
              NetTrace* trace);

// Reverse sweep of one net_step. On entry theta_bar holds d(loss)/d(theta_out)
// and hidden_bar holds d(loss)/d(hidden_out); on exit they hold the gradients
// with respect to the step inputs. input_bar and err_bar accumulate (may be
// null); param_bar accumulates into the flat layout above.
void net_step_backward(const NetConfig& cfg, const double* params,
                       const cplx* input, const cplx* err, const cplx* theta_in,
                       const NetTrace& trace, std::vector<cplx>& theta_bar,
                       std::vector<cplx>* input_bar, std::vector<cplx>* err_bar,
                       double* hidden_bar, double* param_bar);

// Inference wrapper with owned weights and hidden state.
class NetOptimizer : public Optimizer {
 public:
  NetOptimizer(NetConfig cfg, std::vector<double> params);
  void step(std::vector<cplx>& theta, const OptimInput& in) override;
  void reset() override;
  std::vector<double> save_state() const override { return hidden_; }
  void restore_state(const std::vector<double>& s) override;

  const NetConfig& config() const { return cfg_; }
  const std::vector<double>& params() const { return params_; }
  double* hidden() { return hidden_.data(); }

 private:
  NetConfig cfg_;
  std::vector<double> params_, hidden_;
};

// Weight checkpoints: f32 payload, geometry in the header, refuses to load a
// file whose shape does not match its own manifest.
void save_net(const std::string& path, const NetConfig& cfg,
              const std::vector<double>& params);
std::pair<NetConfig, std::vector<double>> load_net(const std::string& path);

}  // namespace afkit
