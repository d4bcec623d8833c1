#include "afkit/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>

#include "afkit/blob.hpp"
#include "afkit/fft.hpp"
#include "afkit/metrics.hpp"

namespace afkit {

namespace {

// Per-iteration record: the controller inputs that are live at that point.
struct IterTape {
  std::vector<cplx> theta_in;
  std::vector<cplx> err;
  NetTrace trace;
};

struct AecFrameTape {
  std::vector<cplx> taps;  // (blocks+1) x bins, offset b = b hops back
  IterTape it[2];
  std::size_t steps = 0;
  bool post = false;  // the single step ran after synthesis
};

struct GscFrameTape {
  std::vector<cplx> blocked;       // mics x bins
  std::vector<cplx> blocked_mean;  // bins
  IterTape it[2];
  std::size_t steps = 0;
  bool post = false;
};

void check_ref(LossKind loss, const double* ref) {
  if (loss != LossKind::LogPower && !ref)
    throw ConfigError("this loss needs a reference signal");
}

}  // namespace

AecTrainState::AecTrainState(const MdfConfig& cfg, const NetConfig& net)
    : ubuf(cfg.frame),
      dbuf(cfg.frame),
      dline(cfg.blocks + 1, cfg.bins()),
      synth(cfg.frame),
      theta(cfg.weights(), cplx(0.0, 0.0)),
      hidden(net.hidden_size(), 0.0) {}

GscTrainState::GscTrainState(const GscConfig& cfg, double doa_deg, const NetConfig& net)
    : synth(cfg.frame),
      steer(steering_vector(cfg, doa_deg)),
      theta(cfg.weights(), cplx(0.0, 0.0)),
      hidden(net.hidden_size(), 0.0) {
  bufs.assign(cfg.mics, FrameBuffer(cfg.frame));
  const std::size_t k = cfg.bins();
  prev.fixed_beam.assign(k, cplx(0.0, 0.0));
  prev.blocked.assign(cfg.mics * k, cplx(0.0, 0.0));
  prev.blocked_mean.assign(k, cplx(0.0, 0.0));
}

double aec_segment_grad(const MdfConfig& cfg, const NetConfig& net,
                        const std::vector<double>& params, const SegmentOptions& opt,
                        AecTrainState& state, const double* u, const double* d,
                        const double* ref, std::size_t frames, double* param_grad,
                        std::vector<double>* emitted) {
  cfg.frame.validate();
  if (cfg.frame.n != 2 * cfg.frame.hop)
    throw ConfigError("synthesis needs a frame of exactly two hops");
  if (net.taps != cfg.blocks || net.bins != cfg.bins())
    throw ConfigError("controller geometry does not match the filter");
  if (params.size() != net.param_count()) throw ConfigError("parameter count mismatch");
  if (frames == 0) throw ConfigError("empty segment");
  check_ref(opt.loss, ref);

  const std::size_t hop = cfg.frame.hop, n = cfg.frame.n, k = cfg.bins(),
                    blocks = cfg.blocks;
  Fft fft(n);
  std::vector<AecFrameTape> tape(param_grad ? frames : 0);
  std::vector<double> out;
  out.reserve(frames * hop);

  for (std::size_t c = 0; c < frames; ++c) {
    state.ubuf.push(u + c * hop, hop);
    state.dbuf.push(d + c * hop, hop);
    state.dline.push(fft.rfft(state.ubuf.frame()));
    const std::vector<cplx> d_spec = fft.rfft(state.dbuf.frame());
    AecFrameTape* ft = tape.empty() ? nullptr : &tape[c];
    if (ft) {
      ft->taps.resize((blocks + 1) * k);
      for (std::size_t b = 0; b <= blocks; ++b)
        std::copy(state.dline.at(b), state.dline.at(b) + k, ft->taps.begin() + b * k);
    }

    std::vector<cplx> y_cur;
    mdf_estimate(state.theta, blocks, state.dline, 0, &y_cur);
    std::vector<cplx> e0(k);
    for (std::size_t j = 0; j < k; ++j) e0[j] = d_spec[j] - y_cur[j];

    const cplx* u_now = state.dline.at(0);  // controller input summary
    const bool last = c + 1 == frames;
    bool resynthesize = false;
    if (opt.mode != StepMode::Predict) {
      if (ft) {
        ft->it[0].theta_in = state.theta;
        ft->it[0].err = e0;
        ft->steps = 1;
      }
      net_step(net, params.data(), u_now, e0.data(), state.theta, state.hidden.data(),
               ft ? &ft->it[0].trace : nullptr);
      if (opt.mode == StepMode::PredictUpdateTwice) {
        std::vector<cplx> y1;
        mdf_estimate(state.theta, blocks, state.dline, 0, &y1);
        std::vector<cplx> e1(k);
        for (std::size_t j = 0; j < k; ++j) e1[j] = d_spec[j] - y1[j];
        if (ft) {
          ft->it[1].theta_in = state.theta;
          ft->it[1].err = e1;
          ft->steps = 2;
        }
        net_step(net, params.data(), u_now, e1.data(), state.theta, state.hidden.data(),
                 ft ? &ft->it[1].trace : nullptr);
      }
      resynthesize = true;
    }
    if (resynthesize) mdf_estimate(state.theta, blocks, state.dline, 0, &y_cur);
    std::vector<cplx> y_prev;
    mdf_estimate(state.theta, blocks, state.dline, 1, &y_prev);
    const std::vector<double> yt_cur = fft.irfft_real_endpoints(y_cur);
    const std::vector<double> yt_prev = fft.irfft_real_endpoints(y_prev);
    const std::vector<double>& d_frame = state.dbuf.frame();
    std::vector<double> sframe(n);
    for (std::size_t i = 0; i < hop; ++i) {
      sframe[i] = d_frame[i] - yt_prev[hop + i];
      sframe[hop + i] = d_frame[hop + i] - yt_cur[hop + i];
    }
    const std::vector<double> chunk = state.synth.synthesize(sframe);
    out.insert(out.end(), chunk.begin(), chunk.end());

    if (opt.mode == StepMode::Predict && !(last && !opt.final_update)) {
      if (ft) {
        ft->it[0].theta_in = state.theta;
        ft->it[0].err = e0;
        ft->steps = 1;
        ft->post = true;
      }
      net_step(net, params.data(), u_now, e0.data(), state.theta, state.hidden.data(),
               ft ? &ft->it[0].trace : nullptr);
    }
  }

  std::vector<double> ref_v;
  if (opt.loss != LossKind::LogPower) ref_v.assign(ref, ref + frames * hop);
  std::vector<double> grad_out;
  const double loss =
      segment_loss(opt.loss, out, ref_v, param_grad ? &grad_out : nullptr);
  if (emitted) *emitted = std::move(out);
  if (!param_grad) return loss;

  // ---- reverse sweep ----
  const std::vector<double>& w = state.synth.window();
  std::vector<cplx> theta_bar(blocks * k, cplx(0.0, 0.0));
  std::vector<double> hidden_bar(net.hidden_size(), 0.0);
  std::vector<double> ytbar(n);
  std::vector<cplx> err_bar(k);

  for (std::size_t c = frames; c-- > 0;) {
    const AecFrameTape& ft = tape[c];
    const cplx* taps = ft.taps.data();

    // The current-chunk estimate is crossfaded into the NEXT frame's output
    // chunk; the previous-chunk re-estimate into this frame's.
    std::vector<cplx> ycur_bar(k, cplx(0.0, 0.0));
    if (c + 1 < frames) {
      std::fill(ytbar.begin(), ytbar.end(), 0.0);
      const double* g = grad_out.data() + (c + 1) * hop;
      for (std::size_t i = 0; i < hop; ++i) ytbar[hop + i] = -w[hop + i] * g[i];
      ycur_bar = fft.irfft_real_endpoints_adjoint(ytbar.data());
    }
    std::fill(ytbar.begin(), ytbar.end(), 0.0);
    const double* g = grad_out.data() + c * hop;
    for (std::size_t i = 0; i < hop; ++i) ytbar[hop + i] = -w[i] * g[i];
    const std::vector<cplx> yprev_bar = fft.irfft_real_endpoints_adjoint(ytbar.data());

    auto add_estimate_path = [&](const std::vector<cplx>& ycur) {
      for (std::size_t b = 0; b < blocks; ++b)
        for (std::size_t j = 0; j < k; ++j)
          theta_bar[b * k + j] += ycur[j] * std::conj(taps[b * k + j]) +
                                  yprev_bar[j] * std::conj(taps[(b + 1) * k + j]);
    };

    if (ft.post) {
      // Step ran after synthesis on the incoming weights: peel it first, then
      // merge its error-feature adjoint into the shared estimate.
      std::fill(err_bar.begin(), err_bar.end(), cplx(0.0, 0.0));
      net_step_backward(net, params.data(), taps, ft.it[0].err.data(),
                        ft.it[0].theta_in.data(), ft.it[0].trace, theta_bar, nullptr,
                        &err_bar, hidden_bar.data(), param_grad);
      for (std::size_t j = 0; j < k; ++j) ycur_bar[j] -= err_bar[j];
      add_estimate_path(ycur_bar);
    } else if (ft.steps == 0) {
      add_estimate_path(ycur_bar);  // predict-only tail frame without the update
    } else {
      // Updates preceded synthesis, so synthesis saw the stepped weights.
      add_estimate_path(ycur_bar);
      for (std::size_t s = ft.steps; s-- > 0;) {
        std::fill(err_bar.begin(), err_bar.end(), cplx(0.0, 0.0));
        net_step_backward(net, params.data(), taps, ft.it[s].err.data(),
                          ft.it[s].theta_in.data(), ft.it[s].trace, theta_bar, nullptr,
                          &err_bar, hidden_bar.data(), param_grad);
        for (std::size_t b = 0; b < blocks; ++b)
          for (std::size_t j = 0; j < k; ++j)
            theta_bar[b * k + j] -= err_bar[j] * std::conj(taps[b * k + j]);
      }
    }
  }
  return loss;
}

double gsc_segment_grad(const GscConfig& cfg, const NetConfig& net,
                        const std::vector<double>& params, const SegmentOptions& opt,
                        GscTrainState& state, const double* const* mics,
                        const double* ref, std::size_t frames, double* param_grad,
                        std::vector<double>* emitted) {
  cfg.frame.validate();
  if (cfg.frame.n != 2 * cfg.frame.hop)
    throw ConfigError("synthesis needs a frame of exactly two hops");
  if (net.taps != cfg.mics || net.bins != cfg.bins())
    throw ConfigError("controller geometry does not match the array");
  if (params.size() != net.param_count()) throw ConfigError("parameter count mismatch");
  if (frames == 0) throw ConfigError("empty segment");
  check_ref(opt.loss, ref);

  const std::size_t hop = cfg.frame.hop, n = cfg.frame.n, k = cfg.bins(), m = cfg.mics;
  Fft fft(n);
  std::vector<GscFrameTape> tape(param_grad ? frames : 0);
  // The previous-frame analysis at segment entry is a carried constant, but
  // its blocked channels still multiply differentiated weights.
  std::vector<cplx> entry_prev_blocked = state.prev.blocked;
  std::vector<double> out;
  out.reserve(frames * hop);

  for (std::size_t c = 0; c < frames; ++c) {
    std::vector<cplx> specs(m * k);
    for (std::size_t ch = 0; ch < m; ++ch) {
      state.bufs[ch].push(mics[ch] + c * hop, hop);
      const auto spec = fft.rfft(state.bufs[ch].frame());
      std::copy(spec.begin(), spec.end(), specs.begin() + ch * k);
    }
    GscFrame fr = gsc_analyze(specs, state.steer, m);
    GscFrameTape* ft = tape.empty() ? nullptr : &tape[c];
    if (ft) {
      ft->blocked = fr.blocked;
      ft->blocked_mean = fr.blocked_mean;
    }

    std::vector<cplx> e0 = gsc_output(fr, state.theta, m);
    const bool last = c + 1 == frames;
    bool resynthesize = false;
    if (opt.mode != StepMode::Predict) {
      if (ft) {
        ft->it[0].theta_in = state.theta;
        ft->it[0].err = e0;
        ft->steps = 1;
      }
      net_step(net, params.data(), fr.blocked_mean.data(), e0.data(), state.theta,
               state.hidden.data(), ft ? &ft->it[0].trace : nullptr);
      if (opt.mode == StepMode::PredictUpdateTwice) {
        std::vector<cplx> e1 = gsc_output(fr, state.theta, m);
        if (ft) {
          ft->it[1].theta_in = state.theta;
          ft->it[1].err = e1;
          ft->steps = 2;
        }
        net_step(net, params.data(), fr.blocked_mean.data(), e1.data(), state.theta,
                 state.hidden.data(), ft ? &ft->it[1].trace : nullptr);
      }
      resynthesize = true;
    }
    std::vector<cplx> e_resyn;
    if (resynthesize) e_resyn = gsc_output(fr, state.theta, m);
    const std::vector<cplx>& e_cur = resynthesize ? e_resyn : e0;
    const std::vector<cplx> e_prev = gsc_output(state.prev, state.theta, m);
    const std::vector<double> t_cur = fft.irfft_real_endpoints(e_cur);
    const std::vector<double> t_prev = fft.irfft_real_endpoints(e_prev);
    std::vector<double> sframe(n);
    for (std::size_t i = 0; i < hop; ++i) {
      sframe[i] = t_prev[hop + i];
      sframe[hop + i] = t_cur[hop + i];
    }
    const std::vector<double> chunk = state.synth.synthesize(sframe);
    out.insert(out.end(), chunk.begin(), chunk.end());

    if (opt.mode == StepMode::Predict && !(last && !opt.final_update)) {
      if (ft) {
        ft->it[0].theta_in = state.theta;
        ft->it[0].err = e0;
        ft->steps = 1;
        ft->post = true;
      }
      net_step(net, params.data(), fr.blocked_mean.data(), e0.data(), state.theta,
               state.hidden.data(), ft ? &ft->it[0].trace : nullptr);
    }
    state.prev = std::move(fr);
  }

  std::vector<double> ref_v;
  if (opt.loss != LossKind::LogPower) ref_v.assign(ref, ref + frames * hop);
  std::vector<double> grad_out;
  const double loss =
      segment_loss(opt.loss, out, ref_v, param_grad ? &grad_out : nullptr);
  if (emitted) *emitted = std::move(out);
  if (!param_grad) return loss;

  const std::vector<double>& w = state.synth.window();
  std::vector<cplx> theta_bar(m * k, cplx(0.0, 0.0));
  std::vector<double> hidden_bar(net.hidden_size(), 0.0);
  std::vector<double> tbar(n);
  std::vector<cplx> err_bar(k);

  for (std::size_t c = frames; c-- > 0;) {
    const GscFrameTape& ft = tape[c];
    const cplx* z_cur = ft.blocked.data();
    const cplx* z_prev = c > 0 ? tape[c - 1].blocked.data() : entry_prev_blocked.data();

    std::vector<cplx> ecur_bar(k, cplx(0.0, 0.0));
    if (c + 1 < frames) {
      std::fill(tbar.begin(), tbar.end(), 0.0);
      const double* g = grad_out.data() + (c + 1) * hop;
      for (std::size_t i = 0; i < hop; ++i) tbar[hop + i] = w[hop + i] * g[i];
      ecur_bar = fft.irfft_real_endpoints_adjoint(tbar.data());
    }
    std::fill(tbar.begin(), tbar.end(), 0.0);
    const double* g = grad_out.data() + c * hop;
    for (std::size_t i = 0; i < hop; ++i) tbar[hop + i] = w[i] * g[i];
    const std::vector<cplx> eprev_bar = fft.irfft_real_endpoints_adjoint(tbar.data());

    auto add_output_path = [&](const std::vector<cplx>& ec_bar) {
      for (std::size_t ch = 0; ch < m; ++ch)
        for (std::size_t j = 0; j < k; ++j)
          theta_bar[ch * k + j] -= ec_bar[j] * std::conj(z_cur[ch * k + j]) +
                                   eprev_bar[j] * std::conj(z_prev[ch * k + j]);
    };

    if (ft.post) {
      std::fill(err_bar.begin(), err_bar.end(), cplx(0.0, 0.0));
      net_step_backward(net, params.data(), ft.blocked_mean.data(), ft.it[0].err.data(),
                        ft.it[0].theta_in.data(), ft.it[0].trace, theta_bar, nullptr,
                        &err_bar, hidden_bar.data(), param_grad);
      for (std::size_t j = 0; j < k; ++j) ecur_bar[j] += err_bar[j];
      add_output_path(ecur_bar);
    } else if (ft.steps == 0) {
      add_output_path(ecur_bar);
    } else {
      add_output_path(ecur_bar);
      for (std::size_t s = ft.steps; s-- > 0;) {
        std::fill(err_bar.begin(), err_bar.end(), cplx(0.0, 0.0));
        net_step_backward(net, params.data(), ft.blocked_mean.data(), ft.it[s].err.data(),
                          ft.it[s].theta_in.data(), ft.it[s].trace, theta_bar, nullptr,
                          &err_bar, hidden_bar.data(), param_grad);
        for (std::size_t ch = 0; ch < m; ++ch)
          for (std::size_t j = 0; j < k; ++j)
            theta_bar[ch * k + j] -= err_bar[j] * std::conj(z_cur[ch * k + j]);
      }
    }
  }
  return loss;
}

Adam::Adam(const AdamConfig& cfg, std::size_t n) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {
  if (cfg.lr <= 0.0 || cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 ||
      cfg.beta2 >= 1.0 || cfg.eps <= 0.0)
    throw ConfigError("bad optimizer hyperparameters");
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw ConfigError("optimizer size mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    params[i] -= cfg_.lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg_.eps);
  }
}

std::vector<double> Adam::save_state() const {
  std::vector<double> s;
  s.reserve(2 + 2 * m_.size());
  s.push_back(static_cast<double>(t_));
  s.push_back(cfg_.lr);
  s.insert(s.end(), m_.begin(), m_.end());
  s.insert(s.end(), v_.begin(), v_.end());
  return s;
}

void Adam::restore_state(const std::vector<double>& s) {
  if (s.size() != 2 + 2 * m_.size()) throw IoError("optimizer state has the wrong length");
  t_ = static_cast<std::size_t>(s[0]);
  cfg_.lr = s[1];
  std::copy(s.begin() + 2, s.begin() + 2 + static_cast<std::ptrdiff_t>(m_.size()), m_.begin());
  std::copy(s.begin() + 2 + static_cast<std::ptrdiff_t>(m_.size()), s.end(), v_.begin());
}

namespace {

// One utterance being advanced segment by segment.
struct TrainSlot {
  std::function<std::size_t()> remaining;                  // frames left
  std::function<double(std::size_t, double*)> run;         // frames, grad sink
};

TrainReport run_train_loop(const NetConfig& net, const TrainSchedule& sched,
                           std::vector<double>& params,
                           const std::function<TrainSlot(std::uint64_t)>& make_slot) {
  net.validate();
  if (params.size() != net.param_count()) throw ConfigError("parameter count mismatch");
  if (sched.batch == 0 || sched.scenes == 0 || sched.epochs == 0)
    throw ConfigError("empty training schedule");
  if (sched.seg_min == 0 || sched.seg_max < sched.seg_min)
    throw ConfigError("bad segment length range");

  Adam adam(sched.adam, params.size());
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stall = 0, epoch0 = 0;
  if (!sched.resume_path.empty()) {
    const TrainResume r = load_train_state(sched.resume_path);
    if (r.best_params.size() != params.size())
      throw ConfigError("resume state does not fit this model");
    adam.restore_state(r.adam_state);
    params = r.best_params;  // checkpoints are written at improvements
    best_loss = r.best_loss;
    stall = r.stall;
    epoch0 = r.epoch + 1;
  }
  std::ofstream csv;
  if (!sched.csv_path.empty()) {
    const bool append = epoch0 > 0 && std::ifstream(sched.csv_path).good();
    csv.open(sched.csv_path, append ? std::ios::app : std::ios::out);
    if (!csv) throw IoError("cannot write " + sched.csv_path);
    if (!append) csv << "epoch,loss,lr,grad_norm,seconds\n";
  }

  TrainReport rep;
  rep.best_epoch = epoch0 > 0 ? epoch0 - 1 : 0;
  std::size_t last_epoch = rep.best_epoch;
  std::vector<double> best_params = params;
  std::vector<double> accum(params.size());

  for (std::size_t epoch = epoch0; epoch < epoch0 + sched.epochs; ++epoch) {
    last_epoch = epoch;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(sched.scenes);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng perm_rng(Rng::derive(sched.seed, 0xE0, epoch));
    for (std::size_t i = order.size(); i-- > 1;)
      std::swap(order[i], order[perm_rng.index(i + 1)]);
    Rng len_rng(Rng::derive(sched.seed, 0xE1, epoch));

    std::vector<TrainSlot> slots;
    std::size_t next = 0;
    auto refill = [&] {
      while (slots.size() < sched.batch && next < order.size())
        slots.push_back(make_slot(Rng::derive(sched.seed, 0x5CE, order[next++])));
    };
    refill();

    double ep_loss = 0.0, ep_gnorm = 0.0;
    std::size_t ep_segments = 0, ep_steps = 0;
    bool bad = false;
    while (!slots.empty()) {
      const auto want = static_cast<std::size_t>(
          std::lround(len_rng.uniform(static_cast<double>(sched.seg_min),
                                      static_cast<double>(sched.seg_max))));
      std::fill(accum.begin(), accum.end(), 0.0);
      std::size_t contrib = 0;
      double batch_loss = 0.0;
      for (TrainSlot& slot : slots) {
        const std::size_t take = std::min(want, slot.remaining());
        if (take == 0) continue;
        batch_loss += slot.run(take, accum.data());
        ++contrib;
      }
      if (contrib == 0) break;
      for (double& a : accum) a /= static_cast<double>(contrib);
      double norm2 = 0.0;
      for (double a : accum) norm2 += a * a;
      const double gnorm = std::sqrt(norm2);
      if (!std::isfinite(batch_loss) || !std::isfinite(gnorm)) {
        bad = true;
        break;
      }
      if (gnorm > sched.clip && gnorm > 0.0)
        for (double& a : accum) a *= sched.clip / gnorm;
      adam.step(params, accum);
      ++rep.steps;
      ++ep_steps;
      ep_loss += batch_loss;
      ep_gnorm += gnorm;
      ep_segments += contrib;

      std::erase_if(slots, [](const TrainSlot& s) { return s.remaining() == 0; });
      refill();
    }

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (bad) {
      rep.diverged = true;
      if (csv.is_open())
        csv << epoch << ",nan," << adam.lr() << ",nan," << secs << "\n";
      break;
    }
    const double mean_loss = ep_loss / static_cast<double>(std::max<std::size_t>(1, ep_segments));
    rep.epoch_loss.push_back(mean_loss);
    if (csv.is_open())
      csv << epoch << ',' << mean_loss << ',' << adam.lr() << ','
          << ep_gnorm / static_cast<double>(std::max<std::size_t>(1, ep_steps)) << ',' << secs
          << "\n";

    if (mean_loss < best_loss - 1e-9) {
      best_loss = mean_loss;
      best_params = params;
      rep.best_epoch = epoch;
      stall = 0;
      if (!sched.checkpoint_path.empty()) {
        save_net(sched.checkpoint_path, net, params);
        save_train_state(sched.checkpoint_path + ".train", adam, epoch, stall, best_loss,
                         best_params);
      }
    } else {
      ++stall;
      if (stall >= sched.stop_patience) break;
      if (stall % sched.plateau_patience == 0) adam.lr() *= 0.5;
    }
  }

  params = best_params;  // hand back the best model seen
  rep.best_loss = best_loss;
  if (!sched.checkpoint_path.empty()) {
    // Final write carries the end-of-run optimizer moments and patience
    // counter so a resumed run picks up exactly where this one stopped.
    save_net(sched.checkpoint_path, net, best_params);
    save_train_state(sched.checkpoint_path + ".train", adam, last_epoch, stall, best_loss,
                     best_params);
  }
  return rep;
}

}  // namespace

TrainReport train_echo_controller(const MdfConfig& filter, const NetConfig& net,
                                  const SegmentOptions& opt, const AecSceneParams& scene,
                                  const TrainSchedule& sched, std::vector<double>& params) {
  const std::size_t hop = filter.frame.hop;
  auto make_slot = [&, opt](std::uint64_t seed) {
    struct Slot {
      AecScene scene;
      std::vector<double> ref;
      AecTrainState state;
      std::size_t cursor = 0, total = 0;
      Slot(const MdfConfig& f, const NetConfig& n) : state(f, n) {}
    };
    auto s = std::make_shared<Slot>(filter, net);
    s->scene = make_aec_scene(scene, seed);
    s->total = s->scene.u.size() / hop;
    if (opt.loss == LossKind::LogMse) {
      // The output should reproduce everything that is not echo, one hop late.
      std::vector<double> keep(s->scene.d.size());
      for (std::size_t i = 0; i < keep.size(); ++i)
        keep[i] = s->scene.d[i] - s->scene.echo[i];
      s->ref = delayed(keep, hop);
    } else if (opt.loss == LossKind::NegSiSdr) {
      s->ref = delayed(s->scene.near_speech, hop);
    }
    TrainSlot slot;
    slot.remaining = [s] { return s->total - s->cursor; };
    slot.run = [s, this_cfg = filter, this_net = net, opt, &params](std::size_t frames,
                                                                   double* grad) {
      const std::size_t hop2 = this_cfg.frame.hop;
      const double* refp = s->ref.empty() ? nullptr : s->ref.data() + s->cursor * hop2;
      const double loss = aec_segment_grad(
          this_cfg, this_net, params, opt, s->state, s->scene.u.data() + s->cursor * hop2,
          s->scene.d.data() + s->cursor * hop2, refp, frames, grad);
      s->cursor += frames;
      return loss;
    };
    return slot;
  };
  return run_train_loop(net, sched, params, make_slot);
}

TrainReport train_beam_controller(const GscConfig& array, const NetConfig& net,
                                  const SegmentOptions& opt, const GscSceneParams& scene,
                                  const TrainSchedule& sched, std::vector<double>& params) {
  if (scene.array.mics != array.mics || scene.array.frame.n != array.frame.n ||
      scene.array.frame.hop != array.frame.hop)
    throw ConfigError("scene array geometry differs from the processing array");
  const std::size_t hop = array.frame.hop;
  auto make_slot = [&, opt](std::uint64_t seed) {
    struct Slot {
      GscScene scene;
      std::vector<double> ref;
      std::vector<const double*> ptrs;
      std::unique_ptr<GscTrainState> state;
      std::size_t cursor = 0, total = 0;
    };
    auto s = std::make_shared<Slot>();
    s->scene = make_gsc_scene(scene, seed);
    s->state = std::make_unique<GscTrainState>(array, s->scene.target_doa_deg, net);
    s->total = s->scene.mics[0].size() / hop;
    s->ptrs.resize(array.mics);
    if (opt.loss != LossKind::LogPower) s->ref = delayed(s->scene.target_ref, hop);
    TrainSlot slot;
    slot.remaining = [s] { return s->total - s->cursor; };
    slot.run = [s, this_cfg = array, this_net = net, opt, &params](std::size_t frames,
                                                                  double* grad) {
      const std::size_t hop2 = this_cfg.frame.hop;
      for (std::size_t c = 0; c < this_cfg.mics; ++c)
        s->ptrs[c] = s->scene.mics[c].data() + s->cursor * hop2;
      const double* refp = s->ref.empty() ? nullptr : s->ref.data() + s->cursor * hop2;
      const double loss = gsc_segment_grad(this_cfg, this_net, params, opt, *s->state,
                                           s->ptrs.data(), refp, frames, grad);
      s->cursor += frames;
      return loss;
    };
    return slot;
  };
  return run_train_loop(net, sched, params, make_slot);
}

void save_train_state(const std::string& path, const Adam& adam, std::size_t epoch,
                      std::size_t stall, double best_loss,
                      const std::vector<double>& best_params) {
  BlobFile f;
  f.kind = 2;
  f.meta = {{"epoch", static_cast<std::uint32_t>(epoch)},
            {"stall", static_cast<std::uint32_t>(stall)}};
  f.blocks.push_back({"adam", BlockType::F64, adam.save_state()});
  f.blocks.push_back({"best_loss", BlockType::F64, {best_loss}});
  f.blocks.push_back({"best_params", BlockType::F64, best_params});
  write_blob(path, f);
}

TrainResume load_train_state(const std::string& path) {
  BlobFile f = read_blob(path);
  if (f.kind != 2) throw IoError(path + " is not a training state");
  TrainResume r;
  r.adam_state = f.need("adam").data;
  r.epoch = f.meta_value("epoch");
  r.stall = f.meta_value("stall");
  const auto& bl = f.need("best_loss").data;
  if (bl.size() != 1) throw IoError("training state is malformed");
  r.best_loss = bl[0];
  r.best_params = f.need("best_params").data;
  return r;
}

}  // namespace afkit
