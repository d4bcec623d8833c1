#include "afkit/net.hpp"

#include <algorithm>
#include <cmath>

#include "afkit/blob.hpp"

namespace afkit {
namespace {

double dotn(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double asinh_slope(double x) { return 1.0 / std::sqrt(1.0 + x * x); }

struct Scratch {
  std::vector<double> feat, x, unh, out;
  std::vector<double> r, z, n;
  void resize(const NetConfig& cfg) {
    feat.resize(cfg.in_width());
    x.resize(cfg.hidden);
    r.resize(cfg.hidden);
    z.resize(cfg.hidden);
    n.resize(cfg.hidden);
    unh.resize(cfg.hidden);
    out.resize(cfg.out_width());
  }
};

thread_local Scratch g_scratch;

// Encodes one band's bins into compander space. Bins past the spectrum end
// stay zero.
void gather_features(const NetConfig& cfg, std::size_t b, const cplx* input,
                     const cplx* err, const cplx* theta, double* feat) {
  const std::size_t f = cfg.features(), k = cfg.bins, t_count = cfg.taps;
  std::fill(feat, feat + cfg.in_width(), 0.0);
  for (std::size_t p = 0; p < cfg.band; ++p) {
    const std::size_t j = b * cfg.band + p;
    if (j >= k) break;
    double* dst = feat + p * f;
    dst[0] = std::asinh(input[j].real());
    dst[1] = std::asinh(input[j].imag());
    dst[2] = std::asinh(err[j].real());
    dst[3] = std::asinh(err[j].imag());
    for (std::size_t t = 0; t < t_count; ++t) {
      dst[4 + 2 * t] = std::asinh(theta[t * k + j].real());
      dst[5 + 2 * t] = std::asinh(theta[t * k + j].imag());
    }
  }
}

// h is updated in place; gate activations land in r/z/n/unh.
void gru_cell(const double* p, const GruOffsets& g, std::size_t h_dim, const double* x,
              double* h, double* r, double* z, double* n, double* unh) {
  for (std::size_t i = 0; i < h_dim; ++i) {
    r[i] = sigmoid(p[g.br + i] + dotn(p + g.wr + i * h_dim, x, h_dim) +
                   dotn(p + g.ur + i * h_dim, h, h_dim));
    z[i] = sigmoid(p[g.bz + i] + dotn(p + g.wz + i * h_dim, x, h_dim) +
                   dotn(p + g.uz + i * h_dim, h, h_dim));
    unh[i] = dotn(p + g.un + i * h_dim, h, h_dim);
  }
  for (std::size_t i = 0; i < h_dim; ++i)
    n[i] = std::tanh(p[g.bn + i] + dotn(p + g.wn + i * h_dim, x, h_dim) + r[i] * unh[i]);
  for (std::size_t i = 0; i < h_dim; ++i) h[i] = (1.0 - z[i]) * n[i] + z[i] * h[i];
}

// Reverse of gru_cell. hbar enters as d/d(h_out); hinbar gets d/d(h_in),
// xbar accumulates d/d(x). Parameter slopes accumulate when pbar is set.
void gru_backward(const double* p, double* pbar, const GruOffsets& g, std::size_t h_dim,
                  const double* x, const double* h_in, const double* r, const double* z,
                  const double* n, const double* unh, const double* hbar, double* xbar,
                  double* hinbar) {
  std::vector<double> anb(h_dim), azb(h_dim), arb(h_dim), unhbar(h_dim);
  for (std::size_t i = 0; i < h_dim; ++i) {
    const double nbar = hbar[i] * (1.0 - z[i]);
    const double zbar = hbar[i] * (h_in[i] - n[i]);
    hinbar[i] += hbar[i] * z[i];
    anb[i] = nbar * (1.0 - n[i] * n[i]);
    const double rbar = anb[i] * unh[i];
    unhbar[i] = anb[i] * r[i];
    azb[i] = zbar * z[i] * (1.0 - z[i]);
    arb[i] = rbar * r[i] * (1.0 - r[i]);
  }
  for (std::size_t i = 0; i < h_dim; ++i) {
    axpy(anb[i], p + g.wn + i * h_dim, xbar, h_dim);
    axpy(azb[i], p + g.wz + i * h_dim, xbar, h_dim);
    axpy(arb[i], p + g.wr + i * h_dim, xbar, h_dim);
    axpy(unhbar[i], p + g.un + i * h_dim, hinbar, h_dim);
    axpy(azb[i], p + g.uz + i * h_dim, hinbar, h_dim);
    axpy(arb[i], p + g.ur + i * h_dim, hinbar, h_dim);
    if (pbar) {
      axpy(anb[i], x, pbar + g.wn + i * h_dim, h_dim);
      axpy(azb[i], x, pbar + g.wz + i * h_dim, h_dim);
      axpy(arb[i], x, pbar + g.wr + i * h_dim, h_dim);
      axpy(unhbar[i], h_in, pbar + g.un + i * h_dim, h_dim);
      axpy(azb[i], h_in, pbar + g.uz + i * h_dim, h_dim);
      axpy(arb[i], h_in, pbar + g.ur + i * h_dim, h_dim);
      pbar[g.bn + i] += anb[i];
      pbar[g.bz + i] += azb[i];
      pbar[g.br + i] += arb[i];
    }
  }
}

}  // namespace

void NetConfig::validate() const {
  if (hidden == 0 || hidden > 4096 || taps == 0 || bins == 0 || band == 0)
    throw ConfigError("bad controller geometry");
}

ParamOffsets param_offsets(const NetConfig& cfg) {
  const std::size_t h = cfg.hidden, in = cfg.in_width(), out = cfg.out_width();
  ParamOffsets o{};
  std::size_t at = 0;
  auto claim = [&at](std::size_t n) {
    const std::size_t r = at;
    at += n;
    return r;
  };
  o.down_w = claim(h * in);
  o.down_b = claim(h);
  for (GruOffsets* g : {&o.gru1, &o.gru2}) {
    g->wr = claim(h * h);
    g->wz = claim(h * h);
    g->wn = claim(h * h);
    g->ur = claim(h * h);
    g->uz = claim(h * h);
    g->un = claim(h * h);
    g->br = claim(h);
    g->bz = claim(h);
    g->bn = claim(h);
  }
  o.up_w = claim(out * h);
  o.up_b = claim(out);
  o.total = at;
  return o;
}

std::size_t NetConfig::param_count() const { return param_offsets(*this).total; }

std::vector<double> init_params(const NetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const ParamOffsets off = param_offsets(cfg);
  std::vector<double> p(off.total, 0.0);
  const std::size_t h = cfg.hidden;

  auto uniform_fill = [&](std::size_t at, std::size_t rows, std::size_t cols,
                          std::uint64_t idx, double scale) {
    Rng rng(Rng::derive(seed, 0x6b, idx, 0));
    const double lim = scale / std::sqrt(double(cols));
    for (std::size_t i = 0; i < rows * cols; ++i) p[at + i] = rng.uniform(-lim, lim);
  };
  // Orthonormal columns by twice-applied Gram-Schmidt on a Gaussian draw;
  // square, so rows come out orthonormal as well.
  auto ortho_fill = [&](std::size_t at, std::uint64_t idx) {
    Rng rng(Rng::derive(seed, 0x6f, idx, 0));
    std::vector<std::vector<double>> q;
    while (q.size() < h) {
      std::vector<double> v(h);
      for (auto& x : v) x = rng.gaussian();
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& prev : q) axpy(-dotn(prev.data(), v.data(), h), prev.data(), v.data(), h);
      const double norm = std::sqrt(dotn(v.data(), v.data(), h));
      if (norm < 1e-8) continue;  // essentially impossible, but keep init total
      for (auto& x : v) x /= norm;
      q.push_back(std::move(v));
    }
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t c = 0; c < h; ++c) p[at + i * h + c] = q[c][i];
  };

  uniform_fill(off.down_w, h, cfg.in_width(), 0, 1.0);
  std::uint64_t idx = 1;
  for (const GruOffsets* g : {&off.gru1, &off.gru2}) {
    uniform_fill(g->wr, h, h, idx++, 1.0);
    uniform_fill(g->wz, h, h, idx++, 1.0);
    uniform_fill(g->wn, h, h, idx++, 1.0);
    ortho_fill(g->ur, idx++);
    ortho_fill(g->uz, idx++);
    ortho_fill(g->un, idx++);
  }
  // Small output kernel: the controller should start as a near no-op.
  uniform_fill(off.up_w, cfg.out_width(), h, idx++, 0.01);
  return p;
}

void NetTrace::resize(const NetConfig& cfg) {
  const std::size_t n = cfg.bands() * cfg.hidden;
  for (auto* v : {&a0, &h1_in, &h1_out, &h2_in, &h2_out, &r1, &z1, &n1, &un1, &r2, &z2,
                  &n2, &un2})
    v->assign(n, 0.0);
}

void net_step(const NetConfig& cfg, const double* params, const cplx* input,
              const cplx* err, std::vector<cplx>& theta, double* hidden,
              NetTrace* trace) {
  cfg.validate();
  if (!input || !err || !hidden) throw ConfigError("controller step missing inputs");
  if (theta.size() != cfg.taps * cfg.bins) throw ConfigError("controller weight shape");
  const ParamOffsets off = param_offsets(cfg);
  const std::size_t h = cfg.hidden, nb = cfg.bands(), in = cfg.in_width(),
                    out_w = cfg.out_width(), k = cfg.bins, t_count = cfg.taps;
  Scratch& s = g_scratch;
  s.resize(cfg);
  if (trace) trace->resize(cfg);

  for (std::size_t b = 0; b < nb; ++b) {
    gather_features(cfg, b, input, err, theta.data(), s.feat.data());
    for (std::size_t i = 0; i < h; ++i)
      s.x[i] = params[off.down_b + i] + dotn(params + off.down_w + i * in, s.feat.data(), in);

    double* h1 = hidden + b * h;
    double* h2 = hidden + (nb + b) * h;
    if (trace) {
      std::copy(s.x.begin(), s.x.end(), trace->a0.begin() + b * h);
      std::copy(h1, h1 + h, trace->h1_in.begin() + b * h);
      std::copy(h2, h2 + h, trace->h2_in.begin() + b * h);
    }
    gru_cell(params, off.gru1, h, s.x.data(), h1, s.r.data(), s.z.data(), s.n.data(),
             s.unh.data());
    if (trace) {
      std::copy(h1, h1 + h, trace->h1_out.begin() + b * h);
      std::copy(s.r.begin(), s.r.end(), trace->r1.begin() + b * h);
      std::copy(s.z.begin(), s.z.end(), trace->z1.begin() + b * h);
      std::copy(s.n.begin(), s.n.end(), trace->n1.begin() + b * h);
      std::copy(s.unh.begin(), s.unh.end(), trace->un1.begin() + b * h);
    }
    gru_cell(params, off.gru2, h, h1, h2, s.r.data(), s.z.data(), s.n.data(),
             s.unh.data());
    if (trace) {
      std::copy(h2, h2 + h, trace->h2_out.begin() + b * h);
      std::copy(s.r.begin(), s.r.end(), trace->r2.begin() + b * h);
      std::copy(s.z.begin(), s.z.end(), trace->z2.begin() + b * h);
      std::copy(s.n.begin(), s.n.end(), trace->n2.begin() + b * h);
      std::copy(s.unh.begin(), s.unh.end(), trace->un2.begin() + b * h);
    }

    for (std::size_t o = 0; o < out_w; ++o)
      s.out[o] = params[off.up_b + o] + dotn(params + off.up_w + o * h, h2, h);
    for (std::size_t p = 0; p < cfg.band; ++p) {
      const std::size_t j = b * cfg.band + p;
      if (j >= k) break;
      for (std::size_t t = 0; t < t_count; ++t)
        theta[t * k + j] += cplx(s.out[p * 2 * t_count + 2 * t],
                                 s.out[p * 2 * t_count + 2 * t + 1]);
    }
  }
}

void net_step_backward(const NetConfig& cfg, const double* params, const cplx* input,
                       const cplx* err, const cplx* theta_in, const NetTrace& trace,
                       std::vector<cplx>& theta_bar, std::vector<cplx>* input_bar,
                       std::vector<cplx>* err_bar, double* hidden_bar,
                       double* param_bar) {
  const ParamOffsets off = param_offsets(cfg);
  const std::size_t h = cfg.hidden, nb = cfg.bands(), in = cfg.in_width(),
                    out_w = cfg.out_width(), k = cfg.bins, t_count = cfg.taps,
                    f = cfg.features();
  if (theta_bar.size() != t_count * k) throw ConfigError("controller adjoint shape");

  std::vector<double> feat(in), out_bar(out_w), h2bar(h), h1bar(h), x0bar(h),
      feat_bar(in), hin_scratch(h);

  for (std::size_t b = 0; b < nb; ++b) {
    gather_features(cfg, b, input, err, theta_in, feat.data());
    std::fill(out_bar.begin(), out_bar.end(), 0.0);
    for (std::size_t p = 0; p < cfg.band; ++p) {
      const std::size_t j = b * cfg.band + p;
      if (j >= k) break;
      for (std::size_t t = 0; t < t_count; ++t) {
        out_bar[p * 2 * t_count + 2 * t] = theta_bar[t * k + j].real();
        out_bar[p * 2 * t_count + 2 * t + 1] = theta_bar[t * k + j].imag();
      }
    }

    const double* h2_out = trace.h2_out.data() + b * h;
    std::copy(hidden_bar + (nb + b) * h, hidden_bar + (nb + b) * h + h, h2bar.begin());
    for (std::size_t o = 0; o < out_w; ++o) {
      const double ob = out_bar[o];
      if (ob == 0.0) continue;
      axpy(ob, params + off.up_w + o * h, h2bar.data(), h);
      if (param_bar) {
        axpy(ob, h2_out, param_bar + off.up_w + o * h, h);
        param_bar[off.up_b + o] += ob;
      }
    }

    // Cell 2: input was h1_out, hidden was h2_in.
    std::fill(h1bar.begin(), h1bar.end(), 0.0);
    std::fill(hin_scratch.begin(), hin_scratch.end(), 0.0);
    gru_backward(params, param_bar, off.gru2, h, trace.h1_out.data() + b * h,
                 trace.h2_in.data() + b * h, trace.r2.data() + b * h,
                 trace.z2.data() + b * h, trace.n2.data() + b * h,
                 trace.un2.data() + b * h, h2bar.data(), h1bar.data(),
                 hin_scratch.data());
    std::copy(hin_scratch.begin(), hin_scratch.end(), hidden_bar + (nb + b) * h);

    // Cell 1 also feels the future through its own hidden slot.
    axpy(1.0, hidden_bar + b * h, h1bar.data(), h);
    std::fill(x0bar.begin(), x0bar.end(), 0.0);
    std::fill(hin_scratch.begin(), hin_scratch.end(), 0.0);
    gru_backward(params, param_bar, off.gru1, h, trace.a0.data() + b * h,
                 trace.h1_in.data() + b * h, trace.r1.data() + b * h,
                 trace.z1.data() + b * h, trace.n1.data() + b * h,
                 trace.un1.data() + b * h, h1bar.data(), x0bar.data(),
                 hin_scratch.data());
    std::copy(hin_scratch.begin(), hin_scratch.end(), hidden_bar + b * h);

    std::fill(feat_bar.begin(), feat_bar.end(), 0.0);
    for (std::size_t i = 0; i < h; ++i) {
      const double xb = x0bar[i];
      if (xb == 0.0) continue;
      axpy(xb, params + off.down_w + i * in, feat_bar.data(), in);
      if (param_bar) {
        axpy(xb, feat.data(), param_bar + off.down_w + i * in, in);
        param_bar[off.down_b + i] += xb;
      }
    }

    for (std::size_t p = 0; p < cfg.band; ++p) {
      const std::size_t j = b * cfg.band + p;
      if (j >= k) break;
      const double* fb = feat_bar.data() + p * f;
      if (input_bar)
        (*input_bar)[j] += cplx(fb[0] * asinh_slope(input[j].real()),
                                fb[1] * asinh_slope(input[j].imag()));
      if (err_bar)
        (*err_bar)[j] += cplx(fb[2] * asinh_slope(err[j].real()),
                              fb[3] * asinh_slope(err[j].imag()));
      for (std::size_t t = 0; t < t_count; ++t)
        theta_bar[t * k + j] +=
            cplx(fb[4 + 2 * t] * asinh_slope(theta_in[t * k + j].real()),
                 fb[5 + 2 * t] * asinh_slope(theta_in[t * k + j].imag()));
    }
  }
}

NetOptimizer::NetOptimizer(NetConfig cfg, std::vector<double> params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  if (params_.size() != cfg_.param_count())
    throw ConfigError("controller parameter count mismatch");
  hidden_.assign(cfg_.hidden_size(), 0.0);
}

void NetOptimizer::step(std::vector<cplx>& theta, const OptimInput& in) {
  if (in.t_count != cfg_.taps || in.k != cfg_.bins)
    throw ConfigError("controller input shape mismatch");
  if (!in.input) throw ConfigError("controller needs the input summary spectrum");
  net_step(cfg_, params_.data(), in.input, in.err, theta, hidden_.data(), nullptr);
}

void NetOptimizer::reset() { std::fill(hidden_.begin(), hidden_.end(), 0.0); }

void NetOptimizer::restore_state(const std::vector<double>& s) {
  if (s.size() != hidden_.size()) throw ConfigError("controller state size mismatch");
  hidden_ = s;
}

void save_net(const std::string& path, const NetConfig& cfg,
              const std::vector<double>& params) {
  cfg.validate();
  if (params.size() != cfg.param_count())
    throw ConfigError("refusing to save mismatched parameter vector");
  BlobFile f;
  f.kind = 1;
  f.meta = {{"hidden", std::uint32_t(cfg.hidden)},
            {"taps", std::uint32_t(cfg.taps)},
            {"bins", std::uint32_t(cfg.bins)},
            {"band", std::uint32_t(cfg.band)}};
  f.blocks.push_back({"params", BlockType::F32, params});
  write_blob(path, f);
}

std::pair<NetConfig, std::vector<double>> load_net(const std::string& path) {
  BlobFile f = read_blob(path);
  if (f.kind != 1) throw IoError(path + " is not a weight checkpoint");
  NetConfig cfg;
  cfg.hidden = f.meta_value("hidden");
  cfg.taps = f.meta_value("taps");
  cfg.bins = f.meta_value("bins");
  cfg.band = f.meta_value("band");
  cfg.validate();
  const Block& b = f.need("params");
  if (b.data.size() != cfg.param_count())
    throw IoError(path + " parameter block does not match its geometry");
  return {cfg, b.data};
}

}  // namespace afkit
