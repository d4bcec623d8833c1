#include "afkit/stream.hpp"

#include <algorithm>
#include <cmath>

#include "afkit/blob.hpp"

namespace afkit {
namespace {

bool all_finite(const std::vector<cplx>& v) {
  for (const cplx& x : v)
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
  return true;
}

std::vector<double> flatten(const std::vector<cplx>& v) {
  std::vector<double> out(2 * v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[2 * i] = v[i].real();
    out[2 * i + 1] = v[i].imag();
  }
  return out;
}

void unflatten(const std::vector<double>& in, std::vector<cplx>& v) {
  if (in.size() != 2 * v.size()) throw IoError("state block has the wrong length");
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = cplx(in[2 * i], in[2 * i + 1]);
}

void load_doubles(const BlobFile& f, const std::string& name, std::vector<double>& dst) {
  const Block& b = f.need(name);
  if (b.data.size() != dst.size()) throw IoError("state block has the wrong length");
  std::copy(b.data.begin(), b.data.end(), dst.begin());
}

constexpr std::uint32_t kStateKind = 3;

}  // namespace

StepMode parse_step_mode(const std::string& s) {
  if (s == "p") return StepMode::Predict;
  if (s == "pu") return StepMode::PredictUpdate;
  if (s == "pux2") return StepMode::PredictUpdateTwice;
  throw ConfigError("unknown step mode: " + s + " (want p, pu, or pux2)");
}

const char* step_mode_name(StepMode m) {
  switch (m) {
    case StepMode::Predict: return "p";
    case StepMode::PredictUpdate: return "pu";
    default: return "pux2";
  }
}

EchoCanceller::EchoCanceller(const MdfConfig& cfg, std::unique_ptr<Optimizer> opt,
                             StepMode mode)
    : cfg_(cfg),
      opt_(std::move(opt)),
      mode_(mode),
      fft_(cfg.frame.n),
      ubuf_(cfg.frame),
      dbuf_(cfg.frame),
      dline_(cfg.blocks + 1, cfg.bins()),
      synth_(cfg.frame),
      theta_(cfg.weights(), cplx(0.0, 0.0)),
      taps_(cfg.weights(), cplx(0.0, 0.0)) {
  cfg_.frame.validate();
  if (cfg_.frame.n != 2 * cfg_.frame.hop)
    throw ConfigError("synthesis needs a frame of exactly two hops");
  if (cfg_.blocks == 0) throw ConfigError("echo filter needs at least one block");
  if (!opt_) throw ConfigError("echo canceller needs an optimizer");
}

void EchoCanceller::set_weights(const std::vector<cplx>& theta) {
  if (theta.size() != theta_.size()) throw ConfigError("weight shape mismatch");
  theta_ = theta;
}

bool EchoCanceller::process_chunk(const double* u, const double* d,
                                  std::vector<double>& out) {
  const std::size_t hop = cfg_.frame.hop, n = cfg_.frame.n, k = cfg_.bins(),
                    blocks = cfg_.blocks;
  ubuf_.push(u, hop);
  dbuf_.push(d, hop);
  dline_.push(fft_.rfft(ubuf_.frame()));
  const std::vector<cplx> d_spec = fft_.rfft(dbuf_.frame());
  for (std::size_t b = 0; b < blocks; ++b) {
    const cplx* src = dline_.at(b);
    std::copy(src, src + k, taps_.begin() + b * k);
  }

  std::vector<cplx> y_cur;
  mdf_estimate(theta_, blocks, dline_, 0, &y_cur);
  std::vector<cplx> e0(k);
  for (std::size_t j = 0; j < k; ++j) e0[j] = d_spec[j] - y_cur[j];

  bool ok = all_finite(e0);
  const OptimInput in{taps_.data(), taps_.data(), e0.data(), blocks, k};
  bool resynthesize = false;

  if (ok && mode_ != StepMode::Predict) {
    const auto theta_snap = theta_;
    const auto opt_snap = opt_->save_state();
    opt_->step(theta_, in);
    if (mode_ == StepMode::PredictUpdateTwice && all_finite(theta_)) {
      std::vector<cplx> y1;
      mdf_estimate(theta_, blocks, dline_, 0, &y1);
      std::vector<cplx> e1(k);
      for (std::size_t j = 0; j < k; ++j) e1[j] = d_spec[j] - y1[j];
      if (all_finite(e1))
        opt_->step(theta_, {taps_.data(), taps_.data(), e1.data(), blocks, k});
    }
    if (all_finite(theta_)) {
      resynthesize = true;
    } else {
      theta_ = theta_snap;
      opt_->restore_state(opt_snap);
      ok = false;
    }
  }
  if (resynthesize) mdf_estimate(theta_, blocks, dline_, 0, &y_cur);

  std::vector<cplx> y_prev;
  mdf_estimate(theta_, blocks, dline_, 1, &y_prev);
  const std::vector<double> yt_cur = fft_.irfft_real_endpoints(y_cur);
  const std::vector<double> yt_prev = fft_.irfft_real_endpoints(y_prev);
  const std::vector<double>& d_frame = dbuf_.frame();
  std::vector<double> sframe(n);
  for (std::size_t i = 0; i < hop; ++i) {
    sframe[i] = d_frame[i] - yt_prev[hop + i];
    sframe[hop + i] = d_frame[hop + i] - yt_cur[hop + i];
  }
  const std::vector<double> chunk = synth_.synthesize(sframe);
  out.insert(out.end(), chunk.begin(), chunk.end());

  if (ok && mode_ == StepMode::Predict) {
    const auto theta_snap = theta_;
    const auto opt_snap = opt_->save_state();
    opt_->step(theta_, in);
    if (!all_finite(theta_)) {
      theta_ = theta_snap;
      opt_->restore_state(opt_snap);
      ok = false;
    }
  }

  ++frames_;
  if (!ok) ++rejected_;
  return ok;
}

std::vector<double> EchoCanceller::process(const std::vector<double>& u,
                                           const std::vector<double>& d) {
  const std::size_t hop = cfg_.frame.hop;
  if (u.size() != d.size() || u.size() % hop != 0)
    throw ConfigError("streams must share a length divisible by the hop");
  std::vector<double> out;
  out.reserve(u.size());
  for (std::size_t at = 0; at < u.size(); at += hop)
    process_chunk(u.data() + at, d.data() + at, out);
  return out;
}

void EchoCanceller::save_state(const std::string& path) const {
  BlobFile f;
  f.kind = kStateKind;
  f.meta = {{"plant", 1},
            {"mode", std::uint32_t(mode_)},
            {"blocks", std::uint32_t(cfg_.blocks)},
            {"n", std::uint32_t(cfg_.frame.n)},
            {"hop", std::uint32_t(cfg_.frame.hop)},
            {"head", std::uint32_t(dline_.head())},
            {"frames", std::uint32_t(frames_)},
            {"rejected", std::uint32_t(rejected_)}};
  f.blocks.push_back({"theta", BlockType::F64, flatten(theta_)});
  f.blocks.push_back({"opt", BlockType::F64, opt_->save_state()});
  f.blocks.push_back({"ubuf", BlockType::F64, ubuf_.raw()});
  f.blocks.push_back({"dbuf", BlockType::F64, dbuf_.raw()});
  f.blocks.push_back({"dline", BlockType::F64, flatten(dline_.raw())});
  f.blocks.push_back({"tail", BlockType::F64, synth_.tail()});
  write_blob(path, f);
}

void EchoCanceller::load_state(const std::string& path) {
  BlobFile f = read_blob(path);
  if (f.kind != kStateKind || f.meta_value("plant") != 1)
    throw IoError(path + " is not an echo canceller state");
  if (f.meta_value("mode") != std::uint32_t(mode_) ||
      f.meta_value("blocks") != cfg_.blocks || f.meta_value("n") != cfg_.frame.n ||
      f.meta_value("hop") != cfg_.frame.hop)
    throw IoError(path + " was saved from a differently configured canceller");
  unflatten(f.need("theta").data, theta_);
  opt_->restore_state(f.need("opt").data);
  load_doubles(f, "ubuf", ubuf_.raw());
  load_doubles(f, "dbuf", dbuf_.raw());
  unflatten(f.need("dline").data, dline_.raw());
  dline_.head() = f.meta_value("head");
  load_doubles(f, "tail", synth_.tail());
  frames_ = f.meta_value("frames");
  rejected_ = f.meta_value("rejected");
}

Beamformer::Beamformer(const GscConfig& cfg, double doa_deg,
                       std::unique_ptr<Optimizer> opt, StepMode mode)
    : cfg_(cfg),
      doa_deg_(doa_deg),
      opt_(std::move(opt)),
      mode_(mode),
      fft_(cfg.frame.n),
      synth_(cfg.frame),
      steer_(steering_vector(cfg, doa_deg)),
      theta_(cfg.weights(), cplx(0.0, 0.0)) {
  cfg_.frame.validate();
  if (cfg_.frame.n != 2 * cfg_.frame.hop)
    throw ConfigError("synthesis needs a frame of exactly two hops");
  if (cfg_.mics < 2) throw ConfigError("beamformer needs at least two mics");
  if (!opt_) throw ConfigError("beamformer needs an optimizer");
  bufs_.assign(cfg_.mics, FrameBuffer(cfg_.frame));
  const std::size_t k = cfg_.bins();
  prev_.fixed_beam.assign(k, cplx(0.0, 0.0));
  prev_.blocked.assign(cfg_.mics * k, cplx(0.0, 0.0));
  prev_.blocked_mean.assign(k, cplx(0.0, 0.0));
}

bool Beamformer::process_chunk(const double* const* mics, std::vector<double>& out) {
  const std::size_t hop = cfg_.frame.hop, n = cfg_.frame.n, k = cfg_.bins(),
                    m = cfg_.mics;
  std::vector<cplx> specs(m * k);
  for (std::size_t c = 0; c < m; ++c) {
    bufs_[c].push(mics[c], hop);
    const auto spec = fft_.rfft(bufs_[c].frame());
    std::copy(spec.begin(), spec.end(), specs.begin() + c * k);
  }
  GscFrame fr = gsc_analyze(specs, steer_, m);

  std::vector<cplx> e0 = gsc_output(fr, theta_, m);
  bool ok = all_finite(e0);
  const OptimInput in{fr.blocked.data(), fr.blocked_mean.data(), e0.data(), m, k};
  bool resynthesize = false;

  if (ok && mode_ != StepMode::Predict) {
    const auto theta_snap = theta_;
    const auto opt_snap = opt_->save_state();
    opt_->step(theta_, in);
    if (mode_ == StepMode::PredictUpdateTwice && all_finite(theta_)) {
      std::vector<cplx> e1 = gsc_output(fr, theta_, m);
      if (all_finite(e1))
        opt_->step(theta_, {fr.blocked.data(), fr.blocked_mean.data(), e1.data(), m, k});
    }
    if (all_finite(theta_)) {
      resynthesize = true;
    } else {
      theta_ = theta_snap;
      opt_->restore_state(opt_snap);
      ok = false;
    }
  }
  std::vector<cplx> e_resyn;
  if (resynthesize) e_resyn = gsc_output(fr, theta_, m);
  const std::vector<cplx>& e_cur = resynthesize ? e_resyn : e0;
  const std::vector<cplx> e_prev = gsc_output(prev_, theta_, m);
  const std::vector<double> t_cur = fft_.irfft_real_endpoints(e_cur);
  const std::vector<double> t_prev = fft_.irfft_real_endpoints(e_prev);
  std::vector<double> sframe(n);
  for (std::size_t i = 0; i < hop; ++i) {
    sframe[i] = t_prev[hop + i];
    sframe[hop + i] = t_cur[hop + i];
  }
  const std::vector<double> chunk = synth_.synthesize(sframe);
  out.insert(out.end(), chunk.begin(), chunk.end());

  if (ok && mode_ == StepMode::Predict) {
    const auto theta_snap = theta_;
    const auto opt_snap = opt_->save_state();
    opt_->step(theta_, in);
    if (!all_finite(theta_)) {
      theta_ = theta_snap;
      opt_->restore_state(opt_snap);
      ok = false;
    }
  }

  prev_ = std::move(fr);
  ++frames_;
  if (!ok) ++rejected_;
  return ok;
}

std::vector<double> Beamformer::process(const std::vector<std::vector<double>>& mics) {
  if (mics.size() != cfg_.mics) throw ConfigError("channel count mismatch");
  const std::size_t hop = cfg_.frame.hop, len = mics[0].size();
  for (const auto& ch : mics)
    if (ch.size() != len) throw ConfigError("channels must share one length");
  if (len % hop != 0) throw ConfigError("stream length must divide into hops");
  std::vector<double> out;
  out.reserve(len);
  std::vector<const double*> ptrs(cfg_.mics);
  for (std::size_t at = 0; at < len; at += hop) {
    for (std::size_t c = 0; c < cfg_.mics; ++c) ptrs[c] = mics[c].data() + at;
    process_chunk(ptrs.data(), out);
  }
  return out;
}

void Beamformer::save_state(const std::string& path) const {
  BlobFile f;
  f.kind = kStateKind;
  f.meta = {{"plant", 2},
            {"mode", std::uint32_t(mode_)},
            {"mics", std::uint32_t(cfg_.mics)},
            {"n", std::uint32_t(cfg_.frame.n)},
            {"hop", std::uint32_t(cfg_.frame.hop)},
            {"frames", std::uint32_t(frames_)},
            {"rejected", std::uint32_t(rejected_)}};
  f.blocks.push_back({"doa", BlockType::F64, {doa_deg_}});
  f.blocks.push_back({"theta", BlockType::F64, flatten(theta_)});
  f.blocks.push_back({"opt", BlockType::F64, opt_->save_state()});
  for (std::size_t c = 0; c < cfg_.mics; ++c)
    f.blocks.push_back({"mic" + std::to_string(c), BlockType::F64, bufs_[c].raw()});
  f.blocks.push_back({"prev_beam", BlockType::F64, flatten(prev_.fixed_beam)});
  f.blocks.push_back({"prev_blocked", BlockType::F64, flatten(prev_.blocked)});
  f.blocks.push_back({"prev_mean", BlockType::F64, flatten(prev_.blocked_mean)});
  f.blocks.push_back({"tail", BlockType::F64, synth_.tail()});
  write_blob(path, f);
}

void Beamformer::load_state(const std::string& path) {
  BlobFile f = read_blob(path);
  if (f.kind != kStateKind || f.meta_value("plant") != 2)
    throw IoError(path + " is not a beamformer state");
  if (f.meta_value("mode") != std::uint32_t(mode_) || f.meta_value("mics") != cfg_.mics ||
      f.meta_value("n") != cfg_.frame.n || f.meta_value("hop") != cfg_.frame.hop)
    throw IoError(path + " was saved from a differently configured beamformer");
  const auto& doa = f.need("doa").data;
  if (doa.size() != 1 || doa[0] != doa_deg_)
    throw IoError(path + " was saved for a different look direction");
  unflatten(f.need("theta").data, theta_);
  opt_->restore_state(f.need("opt").data);
  for (std::size_t c = 0; c < cfg_.mics; ++c)
    load_doubles(f, "mic" + std::to_string(c), bufs_[c].raw());
  unflatten(f.need("prev_beam").data, prev_.fixed_beam);
  unflatten(f.need("prev_blocked").data, prev_.blocked);
  unflatten(f.need("prev_mean").data, prev_.blocked_mean);
  load_doubles(f, "tail", synth_.tail());
  frames_ = f.meta_value("frames");
  rejected_ = f.meta_value("rejected");
}

}  // namespace afkit
