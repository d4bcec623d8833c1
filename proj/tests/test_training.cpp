#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "afkit/metrics.hpp"
#include "afkit/stream.hpp"
#include "afkit/train.hpp"
#include "test_util.hpp"

using namespace afkit;
using testutil::max_abs_diff;
using testutil::random_vec;

namespace {

// Central finite difference of a scalar function of the parameter vector.
template <typename F>
std::vector<double> fd_grad(std::vector<double> params, F&& eval, double h = 1e-5) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = eval(params);
    params[i] = keep - h;
    const double dn = eval(params);
    params[i] = keep;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::sqrt(den > 0.0 ? den : 1.0);
}

}  // namespace

// ---- loss oracles ----------------------------------------------------------

TEST_CASE("log power loss matches a hand computation and its finite difference") {
  Rng rng(11);
  const auto x = random_vec(rng, 64, 0.7);
  double ms = 0.0;
  for (double v : x) ms += v * v;
  ms /= 64.0;

  std::vector<double> g;
  const double l = log_power_loss(x, &g);
  CHECK(l == doctest::Approx(std::log(ms + 1e-12)).epsilon(1e-12));

  // d/dx_i ln(mean(x^2)+eps) = 2 x_i / (n (mean+eps))
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(g[i] == doctest::Approx(2.0 * x[i] / (64.0 * (ms + 1e-12))).epsilon(1e-10));
}

TEST_CASE("log mse loss gradient agrees with finite differences") {
  Rng rng(12);
  auto x = random_vec(rng, 48);
  const auto r = random_vec(rng, 48);
  std::vector<double> g;
  const double l0 = log_mse_loss(x, r, &g);
  CHECK(std::isfinite(l0));

  const double h = 1e-6;
  for (std::size_t i : {0u, 7u, 23u, 47u}) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = log_mse_loss(x, r, nullptr);
    x[i] = keep - h;
    const double dn = log_mse_loss(x, r, nullptr);
    x[i] = keep;
    CHECK(g[i] == doctest::Approx((up - dn) / (2.0 * h)).epsilon(1e-4));
  }
}

TEST_CASE("negated si-sdr loss mirrors the metric and differentiates cleanly") {
  Rng rng(13);
  auto ref = random_vec(rng, 80);
  auto out = ref;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.8 * ref[i] + 0.1 * rng.gaussian();

  std::vector<double> g;
  const double l = neg_si_sdr_loss(out, ref, &g);
  CHECK(l == doctest::Approx(-si_sdr_db(ref, out)).epsilon(1e-12));

  const double h = 1e-7;
  for (std::size_t i : {1u, 19u, 54u}) {
    const double keep = out[i];
    out[i] = keep + h;
    const double up = neg_si_sdr_loss(out, ref, nullptr);
    out[i] = keep - h;
    const double dn = neg_si_sdr_loss(out, ref, nullptr);
    out[i] = keep;
    CHECK(g[i] == doctest::Approx((up - dn) / (2.0 * h)).epsilon(1e-3));
  }

  // Perfect reconstruction rails at the cap with a flat gradient.
  const double lp = neg_si_sdr_loss(ref, ref, &g);
  CHECK(lp == -100.0);
  for (double v : g) CHECK(v == 0.0);
}

// ---- parameter optimizer ----------------------------------------------------

TEST_CASE("adam reproduces a two step hand computation") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  Adam adam(cfg, 1);
  std::vector<double> p{1.0};

  // step 1, g = 0.5: m=0.05, v=2.5e-4, mhat=0.5, vhat=0.25
  adam.step(p, {0.5});
  double m = 0.05, v = 2.5e-4;
  double expect = 1.0 - 0.1 * (m / 0.1) / (std::sqrt(v / 1e-3) + 1e-8);
  CHECK(p[0] == doctest::Approx(expect).epsilon(1e-12));

  // step 2, g = -0.25
  m = 0.9 * m + 0.1 * -0.25;
  v = 0.999 * v + 0.001 * 0.0625;
  const double bc1 = 1.0 - 0.81, bc2 = 1.0 - 0.998001;
  expect -= 0.1 * (m / bc1) / (std::sqrt(v / bc2) + 1e-8);
  adam.step(p, {-0.25});
  CHECK(p[0] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(adam.steps() == 2);
}

TEST_CASE("adam state survives a save restore round trip bit exactly") {
  Rng rng(14);
  AdamConfig cfg;
  Adam a(cfg, 8);
  std::vector<double> pa = random_vec(rng, 8);
  std::vector<double> pb = pa;
  for (int i = 0; i < 3; ++i) a.step(pa, random_vec(rng, 8));

  Adam b(cfg, 8);
  b.restore_state(a.save_state());
  const auto g = random_vec(rng, 8);
  std::vector<double> pa2 = pa, pb2 = pa;
  a.step(pa2, g);
  b.step(pb2, g);
  for (std::size_t i = 0; i < 8; ++i) CHECK(pa2[i] == pb2[i]);
  CHECK(b.steps() == 4);
  (void)pb;
}

// ---- trainer forward equals the streaming engine ----------------------------

namespace {

MdfConfig small_aec() {
  MdfConfig cfg;
  cfg.frame = {64, 32};
  cfg.blocks = 4;
  return cfg;
}

NetConfig small_aec_net() {
  NetConfig nc;
  nc.hidden = 8;
  nc.taps = 4;
  nc.bins = 33;
  nc.band = 5;
  return nc;
}

}  // namespace

TEST_CASE("aec trainer forward emits the streaming output bit for bit") {
  const MdfConfig cfg = small_aec();
  const NetConfig nc = small_aec_net();
  const auto params = init_params(nc, 21);
  Rng rng(22);
  const std::size_t frames = 64, hop = cfg.frame.hop;
  const auto u = random_vec(rng, frames * hop);
  const auto d = random_vec(rng, frames * hop, 0.5);

  for (StepMode mode : {StepMode::Predict, StepMode::PredictUpdate,
                        StepMode::PredictUpdateTwice}) {
    CAPTURE(step_mode_name(mode));
    EchoCanceller ec(cfg, std::make_unique<NetOptimizer>(nc, params), mode);
    const auto want = ec.process(u, d);

    SegmentOptions opt;
    opt.mode = mode;
    opt.loss = LossKind::LogPower;
    AecTrainState st(cfg, nc);
    std::vector<double> got;

    SUBCASE("one segment") {
      aec_segment_grad(cfg, nc, params, opt, st, u.data(), d.data(), nullptr, frames,
                       nullptr, &got);
    }
    SUBCASE("split across carried segments") {
      std::vector<double> part;
      aec_segment_grad(cfg, nc, params, opt, st, u.data(), d.data(), nullptr, 23,
                       nullptr, &part);
      got = part;
      aec_segment_grad(cfg, nc, params, opt, st, u.data() + 23 * hop,
                       d.data() + 23 * hop, nullptr, frames - 23, nullptr, &part);
      got.insert(got.end(), part.begin(), part.end());
    }

    REQUIRE(got.size() == want.size());
    CHECK(max_abs_diff(got, want) == 0.0);
    const std::vector<cplx>& tw = ec.weights();
    REQUIRE(st.theta.size() == tw.size());
    double wd = 0.0;
    for (std::size_t i = 0; i < tw.size(); ++i)
      wd = std::max({wd, std::abs(st.theta[i].real() - tw[i].real()),
                     std::abs(st.theta[i].imag() - tw[i].imag())});
    CHECK(wd == 0.0);
  }
}

TEST_CASE("gsc trainer forward emits the streaming output bit for bit") {
  GscConfig cfg;
  cfg.frame = {64, 32};
  cfg.mics = 3;
  NetConfig nc;
  nc.hidden = 8;
  nc.taps = 3;
  nc.bins = 33;
  nc.band = 5;
  const auto params = init_params(nc, 31);
  const double doa = 17.0;

  Rng rng(32);
  const std::size_t frames = 48, hop = cfg.frame.hop;
  std::vector<std::vector<double>> mics(cfg.mics);
  for (auto& ch : mics) ch = random_vec(rng, frames * hop);

  for (StepMode mode : {StepMode::Predict, StepMode::PredictUpdate,
                        StepMode::PredictUpdateTwice}) {
    CAPTURE(step_mode_name(mode));
    Beamformer bf(cfg, doa, std::make_unique<NetOptimizer>(nc, params), mode);
    const auto want = bf.process(mics);

    SegmentOptions opt;
    opt.mode = mode;
    opt.loss = LossKind::LogPower;
    GscTrainState st(cfg, doa, nc);
    std::vector<double> got, part;
    std::vector<const double*> ptrs(cfg.mics);

    for (std::size_t c = 0; c < cfg.mics; ++c) ptrs[c] = mics[c].data();
    gsc_segment_grad(cfg, nc, params, opt, st, ptrs.data(), nullptr, 20, nullptr, &part);
    got = part;
    for (std::size_t c = 0; c < cfg.mics; ++c) ptrs[c] = mics[c].data() + 20 * hop;
    gsc_segment_grad(cfg, nc, params, opt, st, ptrs.data(), nullptr, frames - 20,
                     nullptr, &part);
    got.insert(got.end(), part.begin(), part.end());

    REQUIRE(got.size() == want.size());
    CHECK(max_abs_diff(got, want) == 0.0);
    double wd = 0.0;
    for (std::size_t i = 0; i < st.theta.size(); ++i)
      wd = std::max({wd, std::abs(st.theta[i].real() - bf.weights()[i].real()),
                     std::abs(st.theta[i].imag() - bf.weights()[i].imag())});
    CHECK(wd == 0.0);
  }
}

// ---- analytic gradients against finite differences --------------------------

namespace {

MdfConfig tiny_aec() {
  MdfConfig cfg;
  cfg.frame = {16, 8};
  cfg.blocks = 2;
  return cfg;
}

NetConfig tiny_aec_net() {
  NetConfig nc;
  nc.hidden = 4;
  nc.taps = 2;
  nc.bins = 9;
  nc.band = 5;
  return nc;
}

}  // namespace

TEST_CASE("aec segment gradient matches central finite differences") {
  const MdfConfig cfg = tiny_aec();
  const NetConfig nc = tiny_aec_net();
  REQUIRE(nc.param_count() == 480);
  auto params = init_params(nc, 41);
  // The default init deliberately starts the output layer near zero; kick the
  // weights around so every path in the graph carries signal.
  Rng kick(42);
  for (double& p : params) p += 0.05 * kick.gaussian();

  const std::size_t frames = 3, hop = cfg.frame.hop;
  Rng rng(43);
  const auto u = random_vec(rng, 8 * hop);
  const auto d = random_vec(rng, 8 * hop, 0.6);
  const auto ref = random_vec(rng, 8 * hop, 0.4);

  for (LossKind loss : {LossKind::LogPower, LossKind::LogMse, LossKind::NegSiSdr}) {
    for (StepMode mode : {StepMode::Predict, StepMode::PredictUpdate,
                          StepMode::PredictUpdateTwice}) {
      for (bool final_update : {true, false}) {
        CAPTURE(loss_kind_name(loss));
        CAPTURE(step_mode_name(mode));
        CAPTURE(final_update);

        SegmentOptions opt;
        opt.mode = mode;
        opt.loss = loss;
        opt.final_update = final_update;
        const double* rp = loss == LossKind::LogPower ? nullptr : ref.data();

        // Prime the carried state with two frames so buffers, weights, and
        // hidden units are all nonzero at the segment boundary.
        AecTrainState primed(cfg, nc);
        aec_segment_grad(cfg, nc, params, opt, primed, u.data(), d.data(), rp, 2,
                         nullptr);

        const double* u_seg = u.data() + 2 * hop;
        const double* d_seg = d.data() + 2 * hop;
        const double* r_seg = rp ? rp + 2 * hop : nullptr;

        std::vector<double> grad(params.size(), 0.0);
        AecTrainState st = primed;
        aec_segment_grad(cfg, nc, params, opt, st, u_seg, d_seg, r_seg, frames,
                         grad.data());

        const auto fd = fd_grad(params, [&](const std::vector<double>& p) {
          AecTrainState s2 = primed;
          return aec_segment_grad(cfg, nc, p, opt, s2, u_seg, d_seg, r_seg, frames,
                                  nullptr);
        });
        CHECK(rel_l2(grad, fd) < 1e-3);
      }
    }
  }
}

TEST_CASE("gsc segment gradient matches central finite differences") {
  GscConfig cfg;
  cfg.frame = {16, 8};
  cfg.mics = 2;
  NetConfig nc;
  nc.hidden = 4;
  nc.taps = 2;
  nc.bins = 9;
  nc.band = 5;
  auto params = init_params(nc, 51);
  Rng kick(52);
  for (double& p : params) p += 0.05 * kick.gaussian();

  const std::size_t frames = 3, hop = cfg.frame.hop;
  const double doa = -24.0;
  Rng rng(53);
  std::vector<std::vector<double>> mics(cfg.mics);
  for (auto& ch : mics) ch = random_vec(rng, 8 * hop);
  const auto ref = random_vec(rng, 8 * hop, 0.4);

  std::vector<const double*> p0(cfg.mics), p1(cfg.mics);
  for (std::size_t c = 0; c < cfg.mics; ++c) {
    p0[c] = mics[c].data();
    p1[c] = mics[c].data() + 2 * hop;
  }

  for (LossKind loss : {LossKind::LogPower, LossKind::LogMse, LossKind::NegSiSdr}) {
    for (StepMode mode : {StepMode::Predict, StepMode::PredictUpdate,
                          StepMode::PredictUpdateTwice}) {
      CAPTURE(loss_kind_name(loss));
      CAPTURE(step_mode_name(mode));

      SegmentOptions opt;
      opt.mode = mode;
      opt.loss = loss;
      const double* rp = loss == LossKind::LogPower ? nullptr : ref.data();
      const double* r_seg = rp ? rp + 2 * hop : nullptr;

      GscTrainState primed(cfg, doa, nc);
      gsc_segment_grad(cfg, nc, params, opt, primed, p0.data(), rp, 2, nullptr);

      std::vector<double> grad(params.size(), 0.0);
      GscTrainState st = primed;
      gsc_segment_grad(cfg, nc, params, opt, st, p1.data(), r_seg, frames, grad.data());

      const auto fd = fd_grad(params, [&](const std::vector<double>& p) {
        GscTrainState s2 = primed;
        return gsc_segment_grad(cfg, nc, p, opt, s2, p1.data(), r_seg, frames, nullptr);
      });
      CHECK(rel_l2(grad, fd) < 1e-3);
    }
  }
}

TEST_CASE("segment gradient rejects mismatched shapes") {
  const MdfConfig cfg = tiny_aec();
  NetConfig bad = tiny_aec_net();
  bad.taps = 3;  // filter has 2 blocks
  const auto params = init_params(bad, 1);
  AecTrainState st(cfg, tiny_aec_net());
  SegmentOptions opt;
  std::vector<double> u(64, 0.0), d(64, 0.0), r(64, 0.0);
  CHECK_THROWS_AS(aec_segment_grad(cfg, bad, params, opt, st, u.data(), d.data(),
                                   r.data(), 4, nullptr),
                  ConfigError);

  const NetConfig nc = tiny_aec_net();
  const auto good = init_params(nc, 1);
  CHECK_THROWS_AS(aec_segment_grad(cfg, nc, good, opt, st, u.data(), d.data(),
                                   r.data(), 0, nullptr),
                  ConfigError);
  CHECK_THROWS_AS(aec_segment_grad(cfg, nc, good, opt, st, u.data(), d.data(), nullptr,
                                   4, nullptr),
                  ConfigError);  // log-mse needs a reference
}

// ---- end to end training loop ------------------------------------------------

TEST_CASE("echo controller training runs, logs, checkpoints, and reproduces") {
  const MdfConfig cfg = small_aec();
  NetConfig nc = small_aec_net();

  AecSceneParams sp;
  sp.duration_s = 0.25;  // 125 frames at 16 kHz with a 32-sample hop
  sp.sample_rate = 16000;
  sp.echo_taps = 256;
  sp.rt60_min_s = 0.05;
  sp.rt60_max_s = 0.08;

  TrainSchedule sched;
  sched.scenes = 4;
  sched.epochs = 3;
  sched.batch = 2;
  sched.seg_min = 8;
  sched.seg_max = 16;
  sched.adam.lr = 3e-4;
  sched.seed = 7;
  sched.csv_path = "train_log_test.csv";
  sched.checkpoint_path = "train_ckpt_test.net";

  SegmentOptions opt;
  opt.mode = StepMode::PredictUpdate;
  opt.loss = LossKind::LogMse;

  auto params = init_params(nc, 61);
  const auto report = train_echo_controller(cfg, nc, opt, sp, sched, params);

  REQUIRE(!report.epoch_loss.empty());
  CHECK(!report.diverged);
  CHECK(report.steps > 0);
  for (double l : report.epoch_loss) CHECK(std::isfinite(l));
  CHECK(report.best_loss <= report.epoch_loss[0] + 1e-12);
  for (double p : params) CHECK(std::isfinite(p));

  // log file has the header plus one row per epoch
  std::ifstream csv(sched.csv_path);
  REQUIRE(csv.good());
  std::string line;
  std::getline(csv, line);
  CHECK(line == "epoch,loss,lr,grad_norm,seconds");
  std::size_t rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == report.epoch_loss.size());

  // checkpoint holds the best weights in inference format
  const auto [ck_cfg, ck_params] = load_net(sched.checkpoint_path);
  CHECK(ck_cfg.hidden == nc.hidden);
  CHECK(ck_params.size() == params.size());

  // sidecar restores the exact optimizer state and best parameters
  const TrainResume res = load_train_state(sched.checkpoint_path + ".train");
  REQUIRE(res.best_params.size() == params.size());
  for (std::size_t i = 0; i < params.size(); ++i) CHECK(res.best_params[i] == params[i]);
  CHECK(res.best_loss == report.best_loss);

  // the whole loop is a pure function of the seed
  auto params2 = init_params(nc, 61);
  TrainSchedule sched2 = sched;
  sched2.csv_path.clear();
  sched2.checkpoint_path.clear();
  const auto report2 = train_echo_controller(cfg, nc, opt, sp, sched2, params2);
  REQUIRE(report2.epoch_loss.size() == report.epoch_loss.size());
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
    CHECK(report2.epoch_loss[e] == report.epoch_loss[e]);
  for (std::size_t i = 0; i < params.size(); ++i) CHECK(params2[i] == params[i]);

  std::remove(sched.csv_path.c_str());
  std::remove(sched.checkpoint_path.c_str());
  std::remove((sched.checkpoint_path + ".train").c_str());
}

TEST_CASE("beam controller training smoke run") {
  GscConfig cfg;
  cfg.frame = {64, 32};
  cfg.mics = 2;
  cfg.sample_rate = 16000;
  NetConfig nc;
  nc.hidden = 8;
  nc.taps = 2;
  nc.bins = 33;
  nc.band = 5;

  GscSceneParams sp;
  sp.array = cfg;
  sp.duration_s = 0.25;
  sp.reverb_tails = false;

  TrainSchedule sched;
  sched.scenes = 2;
  sched.epochs = 2;
  sched.batch = 2;
  sched.seg_min = 8;
  sched.seg_max = 16;
  sched.seed = 9;

  SegmentOptions opt;
  opt.mode = StepMode::Predict;
  opt.loss = LossKind::NegSiSdr;

  auto params = init_params(nc, 71);
  const auto report = train_beam_controller(cfg, nc, opt, sp, sched, params);
  REQUIRE(!report.epoch_loss.empty());
  CHECK(!report.diverged);
  for (double l : report.epoch_loss) CHECK(std::isfinite(l));
  for (double p : params) CHECK(std::isfinite(p));
}
