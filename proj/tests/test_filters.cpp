#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "afkit/filters.hpp"
#include "afkit/frames.hpp"
#include "test_util.hpp"

using namespace afkit;
using testutil::naive_conv;
using testutil::random_vec;

TEST_CASE("single-block estimate is a plain per-bin product") {
  MdfConfig cfg;
  cfg.frame = {16, 8};
  cfg.blocks = 1;
  const std::size_t k = cfg.bins();
  SpecDelayLine dl(2, k);
  std::vector<cplx> u(k);
  for (std::size_t i = 0; i < k; ++i) u[i] = cplx(double(i), 1.0);
  dl.push(u);
  std::vector<cplx> theta(k, cplx(2.0, 0.0));
  std::vector<cplx> y;
  mdf_estimate(theta, 1, dl, 0, &y);
  for (std::size_t i = 0; i < k; ++i) CHECK(std::abs(y[i] - 2.0 * u[i]) < 1e-12);
}

TEST_CASE("estimate is linear in the weights") {
  MdfConfig cfg;
  cfg.frame = {64, 32};
  cfg.blocks = 3;
  Rng rng(5);
  const std::size_t k = cfg.bins();
  SpecDelayLine dl(cfg.blocks, k);
  Fft fft(64);
  for (int f = 0; f < 3; ++f) dl.push(fft.rfft(random_vec(rng, 64)));
  std::vector<cplx> ta(cfg.weights()), tb(cfg.weights());
  for (auto& v : ta) v = cplx(rng.gaussian(), rng.gaussian());
  for (auto& v : tb) v = cplx(rng.gaussian(), rng.gaussian());
  std::vector<cplx> ya, yb, ysum;
  mdf_estimate(ta, cfg.blocks, dl, 0, &ya);
  mdf_estimate(tb, cfg.blocks, dl, 0, &yb);
  std::vector<cplx> tsum(cfg.weights());
  for (std::size_t i = 0; i < tsum.size(); ++i) tsum[i] = ta[i] + 0.5 * tb[i];
  mdf_estimate(tsum, cfg.blocks, dl, 0, &ysum);
  for (std::size_t i = 0; i < k; ++i)
    CHECK(std::abs(ysum[i] - (ya[i] + 0.5 * yb[i])) < 1e-9);
}

TEST_CASE("partitioned filter reproduces time-domain convolution on valid halves") {
  // Feed a stream through the block filter with oracle weights; after the
  // delay line warms up, the last hop samples of each inverse-transformed
  // estimate must equal direct convolution.
  MdfConfig cfg;  // 512/256, 8 blocks
  Rng rng(11);
  const std::size_t hop = cfg.frame.hop, n = cfg.frame.n, k = cfg.bins();
  auto ir = random_vec(rng, cfg.blocks * hop);
  for (std::size_t t = 0; t < ir.size(); ++t)
    ir[t] *= std::exp(-3.0 * double(t) / double(ir.size()));
  auto theta = partition_ir(ir, cfg);
  REQUIRE(theta.size() == cfg.blocks * k);

  const std::size_t steps = 24;
  auto u = random_vec(rng, hop * steps);
  auto want = naive_conv(u, ir);

  Fft fft(n);
  FrameBuffer fb(cfg.frame);
  SpecDelayLine dl(cfg.blocks + 1, k);
  double max_err = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    fb.push(u.data() + s * hop, hop);
    dl.push(fft.rfft(fb.frame()));
    std::vector<cplx> y;
    mdf_estimate(theta, cfg.blocks, dl, 0, &y);
    auto yt = fft.irfft_real_endpoints(y);
    if (s < cfg.blocks) continue;  // delay line still warming
    for (std::size_t i = 0; i < hop; ++i)
      max_err = std::max(max_err, std::abs(yt[n - hop + i] - want[s * hop + i]));
  }
  CHECK(max_err < 1e-9);
}

TEST_CASE("previous-hop re-estimate matches convolution one hop back") {
  MdfConfig cfg;
  cfg.frame = {64, 32};
  cfg.blocks = 4;
  Rng rng(19);
  const std::size_t hop = 32, n = 64, k = cfg.bins();
  auto ir = random_vec(rng, cfg.blocks * hop);
  auto theta = partition_ir(ir, cfg);
  const std::size_t steps = 16;
  auto u = random_vec(rng, hop * steps);
  auto want = naive_conv(u, ir);

  Fft fft(n);
  FrameBuffer fb(cfg.frame);
  SpecDelayLine dl(cfg.blocks + 1, k);
  double max_err = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    fb.push(u.data() + s * hop, hop);
    dl.push(fft.rfft(fb.frame()));
    if (s <= cfg.blocks) continue;
    std::vector<cplx> y;
    mdf_estimate(theta, cfg.blocks, dl, 1, &y);
    auto yt = fft.irfft_real_endpoints(y);
    for (std::size_t i = 0; i < hop; ++i)
      max_err = std::max(max_err, std::abs(yt[n - hop + i] - want[(s - 1) * hop + i]));
  }
  CHECK(max_err < 1e-9);
}

TEST_CASE("steering vector is unit modulus with v^H v = M") {
  GscConfig cfg;
  auto v = steering_vector(cfg, 37.0);
  const std::size_t k = cfg.bins();
  for (std::size_t j = 0; j < k; ++j) {
    double norm = 0.0;
    for (std::size_t m = 0; m < cfg.mics; ++m) norm += std::norm(v[m * k + j]);
    CHECK(norm == doctest::Approx(double(cfg.mics)).epsilon(1e-12));
  }
}

TEST_CASE("gsc is distortionless for steered inputs") {
  GscConfig cfg;
  Rng rng(23);
  const std::size_t k = cfg.bins();
  auto v = steering_vector(cfg, -21.0);
  std::vector<cplx> s(k), mics(cfg.mics * k);
  for (std::size_t j = 0; j < k; ++j) {
    s[j] = cplx(rng.gaussian(), rng.gaussian());
    for (std::size_t m = 0; m < cfg.mics; ++m) mics[m * k + j] = v[m * k + j] * s[j];
  }
  auto fr = gsc_analyze(mics, v, cfg.mics);
  std::vector<cplx> theta(cfg.weights());
  for (auto& t : theta) t = cplx(rng.gaussian(), rng.gaussian());
  auto e = gsc_output(fr, theta, cfg.mics);
  for (std::size_t j = 0; j < k; ++j) {
    CHECK(std::abs(fr.fixed_beam[j] - s[j]) < 1e-10);
    CHECK(std::abs(e[j] - s[j]) < 1e-9);
    for (std::size_t m = 0; m < cfg.mics; ++m) CHECK(std::abs(fr.blocked[m * k + j]) < 1e-10);
  }
}

TEST_CASE("blocking is an idempotent projection orthogonal to v") {
  GscConfig cfg;
  Rng rng(31);
  const std::size_t k = cfg.bins();
  auto v = steering_vector(cfg, 48.0);
  std::vector<cplx> mics(cfg.mics * k);
  for (auto& u : mics) u = cplx(rng.gaussian(), rng.gaussian());
  auto fr = gsc_analyze(mics, v, cfg.mics);
  auto fr2 = gsc_analyze(fr.blocked, v, cfg.mics);
  for (std::size_t i = 0; i < fr.blocked.size(); ++i)
    CHECK(std::abs(fr2.blocked[i] - fr.blocked[i]) < 1e-9);
  for (std::size_t j = 0; j < k; ++j) {
    cplx dot(0.0, 0.0);
    for (std::size_t m = 0; m < cfg.mics; ++m)
      dot += std::conj(v[m * k + j]) * fr.blocked[m * k + j];
    CHECK(std::abs(dot) < 1e-10);
    CHECK(std::abs(fr2.fixed_beam[j]) < 1e-10);  // blocked output carries no beam component
  }
}

TEST_CASE("gsc output matches a dense per-bin oracle") {
  GscConfig cfg;
  cfg.mics = 3;
  Rng rng(41);
  const std::size_t k = cfg.bins(), m = cfg.mics;
  auto v = steering_vector(cfg, 9.0);
  std::vector<cplx> mics(m * k), theta(m * k);
  for (auto& u : mics) u = cplx(rng.gaussian(), rng.gaussian());
  for (auto& t : theta) t = cplx(rng.gaussian(), rng.gaussian());
  auto fr = gsc_analyze(mics, v, m);
  auto e = gsc_output(fr, theta, m);

  for (std::size_t j = 0; j < k; j += 17) {
    // straight-line reimplementation at one bin
    cplx beam(0.0, 0.0);
    for (std::size_t c = 0; c < m; ++c) beam += std::conj(v[c * k + j]) * mics[c * k + j];
    beam /= double(m);
    cplx out = beam;
    for (std::size_t c = 0; c < m; ++c) {
      const cplx z = mics[c * k + j] - v[c * k + j] * beam;
      out -= theta[c * k + j] * z;
    }
    CHECK(std::abs(e[j] - out) < 1e-10);
  }
}

TEST_CASE("shape validation errors") {
  MdfConfig cfg;
  cfg.frame = {16, 8};
  cfg.blocks = 2;
  SpecDelayLine dl(2, cfg.bins());
  std::vector<cplx> theta(cfg.weights() + 1);
  std::vector<cplx> y;
  CHECK_THROWS_AS(mdf_estimate(theta, cfg.blocks, dl, 0, &y), ConfigError);
  theta.resize(cfg.weights());
  CHECK_THROWS_AS(mdf_estimate(theta, cfg.blocks, dl, 1, &y), ConfigError);  // too shallow
  GscConfig g;
  std::vector<cplx> mics(g.mics * g.bins());
  auto v = steering_vector(g, 0.0);
  auto fr = gsc_analyze(mics, v, g.mics);
  std::vector<cplx> bad(3);
  CHECK_THROWS_AS(gsc_output(fr, bad, g.mics), ConfigError);
}
