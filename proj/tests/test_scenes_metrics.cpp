#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "afkit/fft.hpp"
#include "afkit/flops.hpp"
#include "afkit/metrics.hpp"
#include "afkit/scenes.hpp"
#include "test_util.hpp"

using namespace afkit;

TEST_CASE("overlap-add convolution matches the direct form") {
  Rng rng(11);
  for (std::size_t hlen : {1u, 37u, 256u, 300u}) {
    const auto x = testutil::random_vec(rng, 1000, 1.0);
    const auto h = testutil::random_vec(rng, hlen, 1.0);
    const auto fast = fft_convolve(x, h);
    const auto slow = testutil::naive_conv(x, h);
    REQUIRE(fast.size() == slow.size());
    CHECK(testutil::max_abs_diff(fast, slow) < 1e-10);
  }
  // Kernel longer than the signal falls back to the direct form.
  const auto x = testutil::random_vec(rng, 20, 1.0);
  const auto h = testutil::random_vec(rng, 64, 1.0);
  CHECK(testutil::max_abs_diff(fft_convolve(x, h), testutil::naive_conv(x, h)) < 1e-12);
}

TEST_CASE("speechlike source has voiced and silent stretches") {
  Rng rng(42);
  std::vector<std::uint8_t> act;
  const auto x = speechlike_source(rng, 16000, 16000, &act);
  REQUIRE(x.size() == 16000);
  REQUIRE(act.size() == 16000);

  std::size_t on = 0;
  for (auto a : act) on += a;
  CHECK(on > 2000);          // some voicing
  CHECK(on < 15000);         // some pauses

  double act_pow = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (act[i]) act_pow += x[i] * x[i];
  CHECK(std::sqrt(act_pow / static_cast<double>(on)) == doctest::Approx(1.0).epsilon(1e-9));

  // Pause interiors are digital silence once the ramps die out.
  std::size_t exact_zeros = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] == 0.0) ++exact_zeros;
  CHECK(exact_zeros > 100);

  Rng rng2(42);
  const auto y = speechlike_source(rng2, 16000, 16000);
  CHECK(testutil::max_abs_diff(x, y) == 0.0);
}

TEST_CASE("echo paths are unit norm with a leading direct tap") {
  Rng rng(7);
  const auto ir = synth_echo_path(rng, 2048, 0.25, 16000, 0.004);
  REQUIRE(ir.size() == 2048);
  CHECK(std::sqrt(energy(ir)) == doctest::Approx(1.0).epsilon(1e-12));

  std::size_t first = 0;
  while (first < ir.size() && ir[first] == 0.0) ++first;
  CHECK(first <= 64);  // within the direct-delay budget

  double head = 0.0, tail = 0.0;
  for (std::size_t i = first; i < first + 200; ++i) head += ir[i] * ir[i];
  for (std::size_t i = ir.size() - 200; i < ir.size(); ++i) tail += ir[i] * ir[i];
  CHECK(head > 100.0 * tail);

  CHECK_THROWS_AS(synth_echo_path(rng, 0, 0.25, 16000, 0.0), ConfigError);
  CHECK_THROWS_AS(synth_echo_path(rng, 64, -1.0, 16000, 0.0), ConfigError);
}

TEST_CASE("loudspeaker distortion bends the waveform but keeps its level") {
  Rng rng(3);
  const auto x = testutil::random_vec(rng, 4000, 0.7);
  const auto y = loudspeaker_distortion(x);
  REQUIRE(y.size() == x.size());
  CHECK(energy(y) == doctest::Approx(energy(x)).epsilon(1e-9));
  CHECK(testutil::max_abs_diff(x, y) > 0.01);  // actually nonlinear

  const std::vector<double> z(100, 0.0);
  CHECK(testutil::max_abs_diff(loudspeaker_distortion(z), z) == 0.0);
}

TEST_CASE("fractional delay matches the analytic shift of a sinusoid") {
  const unsigned fs = 16000;
  const double f = 400.0, d = 3.37;
  std::vector<double> x(2000);
  for (std::size_t t = 0; t < x.size(); ++t)
    x[t] = std::sin(2.0 * M_PI * f * static_cast<double>(t) / fs);
  const auto y = fractional_delay(x, d);
  double worst = 0.0;
  for (std::size_t t = 100; t + 100 < x.size(); ++t) {
    const double want = std::sin(2.0 * M_PI * f * (static_cast<double>(t) - d) / fs);
    worst = std::max(worst, std::abs(y[t] - want));
  }
  CHECK(worst < 1e-3);

  // Integer delays reduce to an exact shift, negative delays advance.
  const auto z = fractional_delay(x, 5.0);
  double shift_err = 0.0;
  for (std::size_t t = 100; t + 100 < x.size(); ++t)
    shift_err = std::max(shift_err, std::abs(z[t] - x[t - 5]));
  CHECK(shift_err < 1e-9);

  const auto adv = fractional_delay(fractional_delay(x, 2.5), -2.5);
  double round_err = 0.0;
  for (std::size_t t = 100; t + 100 < x.size(); ++t)
    round_err = std::max(round_err, std::abs(adv[t] - x[t]));
  CHECK(round_err < 2e-3);
}

TEST_CASE("echo scenes decompose exactly and honor their level labels") {
  AecSceneParams p;
  p.duration_s = 1.0;
  const AecScene s = make_aec_scene(p, 99);
  REQUIRE(s.d.size() == 16000);

  double worst = 0.0;
  for (std::size_t i = 0; i < s.d.size(); ++i)
    worst = std::max(worst, std::abs(s.d[i] - (s.echo[i] + s.near_speech[i] + s.noise[i])));
  CHECK(worst == 0.0);

  const double pe = energy(s.echo) / static_cast<double>(s.echo.size());
  const double ps = energy(s.near_speech) / static_cast<double>(s.near_speech.size());
  const double pn = energy(s.noise) / static_cast<double>(s.noise.size());
  CHECK(db_pow(ps / pe) == doctest::Approx(s.ser_db).epsilon(1e-9));
  CHECK(db_pow(ps / pn) == doctest::Approx(s.snr_db).epsilon(1e-9));
  CHECK(s.rt60_s >= p.rt60_min_s);
  CHECK(s.rt60_s <= p.rt60_max_s);

  const AecScene again = make_aec_scene(p, 99);
  CHECK(testutil::max_abs_diff(s.d, again.d) == 0.0);
  const AecScene other = make_aec_scene(p, 100);
  CHECK(testutil::max_abs_diff(s.d, other.d) > 0.0);
}

TEST_CASE("single-talk scenes anchor the noise floor to the echo") {
  AecSceneParams p;
  p.duration_s = 0.5;
  p.double_talk = false;
  const AecScene s = make_aec_scene(p, 5);
  CHECK(energy(s.near_speech) == 0.0);
  const double pe = energy(s.echo) / static_cast<double>(s.echo.size());
  const double pn = energy(s.noise) / static_cast<double>(s.noise.size());
  CHECK(pe == doctest::Approx(1.0).epsilon(1e-9));  // unit echo power by convention
  CHECK(db_pow(pe / pn) == doctest::Approx(s.snr_db).epsilon(1e-9));
}

TEST_CASE("array scenes respect geometry labels and determinism") {
  GscSceneParams p;
  p.duration_s = 0.5;
  const GscScene s = make_gsc_scene(p, 31);
  REQUIRE(s.mics.size() == p.array.mics);
  for (const auto& ch : s.mics) REQUIRE(ch.size() == 8000);
  CHECK(std::abs(s.target_doa_deg) <= p.doa_abs_max_deg);
  CHECK(std::abs(s.interf_doa_deg) <= p.doa_abs_max_deg);
  CHECK(std::abs(s.interf_doa_deg - s.target_doa_deg) >= p.min_separation_deg);
  CHECK(energy(s.target_ref) > 0.0);
  CHECK(energy(s.interf_ref) > 0.0);

  const GscScene again = make_gsc_scene(p, 31);
  CHECK(testutil::max_abs_diff(s.mics[0], again.mics[0]) == 0.0);
  CHECK(testutil::max_abs_diff(s.interf_ref, again.interf_ref) == 0.0);

  // Pinning SIR high and SNR at zero doubles the total mic energy: the noise
  // floor is scaled against the mic-averaged target power.
  GscSceneParams quiet = p, loud = p;
  quiet.sir_min_db = quiet.sir_max_db = loud.sir_min_db = loud.sir_max_db = 30.0;
  quiet.snr_min_db = quiet.snr_max_db = 60.0;
  loud.snr_min_db = loud.snr_max_db = 0.0;
  auto total = [](const GscScene& sc) {
    double e = 0.0;
    for (const auto& ch : sc.mics) e += energy(ch);
    return e;
  };
  const double pq = total(make_gsc_scene(quiet, 8));
  const double pl = total(make_gsc_scene(loud, 8));
  CHECK(pl / pq > 1.9);
  CHECK(pl / pq < 2.1);
}

TEST_CASE("echo scene directory round-trips and regenerates bit-exactly") {
  const std::string dir = "tmp_scene_aec";
  std::filesystem::remove_all(dir);
  AecSceneParams p;
  p.duration_s = 0.25;
  p.echo_taps = 512;
  const AecScene s = make_aec_scene(p, 1234);
  save_aec_scene(dir, p, s);

  AecSceneParams lp;
  const AecScene l = load_aec_scene(dir, &lp);
  CHECK(lp.echo_taps == p.echo_taps);
  CHECK(lp.double_talk == p.double_talk);
  CHECK(l.seed == 1234);
  CHECK(l.ser_db == doctest::Approx(s.ser_db).epsilon(1e-15));
  REQUIRE(l.d.size() == s.d.size());
  CHECK(testutil::max_abs_diff(l.d, s.d) < 1e-4);  // float32 storage
  REQUIRE(l.far_active.size() == s.far_active.size());
  std::size_t mask_diff = 0;
  for (std::size_t i = 0; i < l.far_active.size(); ++i)
    mask_diff += l.far_active[i] != s.far_active[i];
  CHECK(mask_diff == 0);

  // The manifest carries everything needed to rebuild the exact doubles.
  const AecScene regen = make_aec_scene(lp, l.seed);
  CHECK(testutil::max_abs_diff(regen.d, s.d) == 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("array scene directory round-trips") {
  const std::string dir = "tmp_scene_gsc";
  std::filesystem::remove_all(dir);
  GscSceneParams p;
  p.duration_s = 0.25;
  const GscScene s = make_gsc_scene(p, 77);
  save_gsc_scene(dir, p, s);

  GscSceneParams lp;
  const GscScene l = load_gsc_scene(dir, &lp);
  CHECK(lp.array.mics == p.array.mics);
  CHECK(lp.array.spacing_m == doctest::Approx(p.array.spacing_m).epsilon(1e-15));
  CHECK(l.target_doa_deg == doctest::Approx(s.target_doa_deg).epsilon(1e-15));
  REQUIRE(l.mics.size() == s.mics.size());
  CHECK(testutil::max_abs_diff(l.mics[2], s.mics[2]) < 1e-4);

  const GscScene regen = make_gsc_scene(lp, l.seed);
  CHECK(testutil::max_abs_diff(regen.mics[2], s.mics[2]) == 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("gated echo-suppression ratio ignores silent stretches") {
  // Four loud frames and four near-silent ones, frame length 4.
  std::vector<double> mic(32, 0.0), out(32, 0.0);
  for (std::size_t i = 0; i < 16; ++i) {
    mic[i] = 2.0;
    out[i] = 0.2;  // 20 dB suppression where the far end is loud
  }
  for (std::size_t i = 16; i < 32; ++i) {
    mic[i] = 1e-6;
    out[i] = 5.0;  // garbage in gated-out frames must not matter
  }
  CHECK(erle_db(mic, out, 4) == doctest::Approx(20.0).epsilon(1e-12));

  std::vector<std::uint8_t> mask(32, 0);
  for (std::size_t i = 0; i < 4; ++i) mask[i] = 1;
  CHECK(erle_masked_db(mic, out, mask, 4) == doctest::Approx(20.0).epsilon(1e-12));
  std::fill(mask.begin() + 16, mask.end(), 1);
  CHECK(erle_masked_db(mic, out, mask, 4) < 0.0);  // now the garbage counts

  CHECK_THROWS_AS(erle_db(mic, std::vector<double>(3, 0.0), 4), ConfigError);
}

TEST_CASE("scale-invariant distortion ratio against orthogonal noise") {
  Rng rng(21);
  auto ref = testutil::random_vec(rng, 500, 1.0);
  auto noise = testutil::random_vec(rng, 500, 1.0);
  double proj = 0.0, rr = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    proj += noise[i] * ref[i];
    rr += ref[i] * ref[i];
  }
  for (std::size_t i = 0; i < ref.size(); ++i) noise[i] -= (proj / rr) * ref[i];

  std::vector<double> est(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) est[i] = ref[i] + noise[i];
  const double want = db_pow(energy(ref) / energy(noise));
  CHECK(si_sdr_db(ref, est) == doctest::Approx(want).epsilon(1e-9));

  CHECK(si_sdr_db(ref, ref) == kMetricCapDb);
  std::vector<double> half(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) half[i] = 0.5 * ref[i];
  CHECK(si_sdr_db(ref, half) == kMetricCapDb);  // gain does not count as distortion
  CHECK(si_sdr_db(ref, std::vector<double>(ref.size(), 0.0)) == -kMetricCapDb);

  std::vector<double> ref2(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) ref2[i] = 2.0 * ref[i];
  CHECK(si_sdr_db(ref2, est) == doctest::Approx(si_sdr_db(ref, est)).epsilon(1e-12));
}

TEST_CASE("interference and artifact ratios from orthogonal projections") {
  Rng rng(33);
  auto t = testutil::random_vec(rng, 400, 1.0);
  auto i = testutil::random_vec(rng, 400, 1.0);
  auto a = testutil::random_vec(rng, 400, 1.0);
  auto orth = [](std::vector<double>& v, const std::vector<double>& b) {
    double p = 0.0, bb = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      p += v[j] * b[j];
      bb += b[j] * b[j];
    }
    for (std::size_t j = 0; j < v.size(); ++j) v[j] -= (p / bb) * b[j];
  };
  orth(i, t);
  orth(a, t);
  orth(a, i);

  std::vector<double> est(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) est[j] = 2.0 * t[j] + 0.5 * i[j] + a[j];
  const SirSar r = sir_sar_db(est, t, i);
  CHECK(r.sir_db == doctest::Approx(db_pow(4.0 * energy(t) / (0.25 * energy(i)))).epsilon(1e-9));
  CHECK(r.sar_db ==
        doctest::Approx(db_pow((4.0 * energy(t) + 0.25 * energy(i)) / energy(a))).epsilon(1e-9));

  const SirSar clean = sir_sar_db(t, t, i);
  CHECK(clean.sir_db == kMetricCapDb);
  CHECK(clean.sar_db == kMetricCapDb);
}

TEST_CASE("delay helper pads the front with zeros") {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  const auto y = delayed(x, 2);
  CHECK(y == std::vector<double>{0.0, 0.0, 1.0, 2.0});
}

TEST_CASE("cost model matches hand-computed counts") {
  FrameConfig tiny{16, 8};
  MdfConfig aec{tiny, 2};
  // 4 transforms at 5*16*4 = 320 each, 2 passes of 2*9 MACs, norm+update.
  CHECK(aec_flops_per_frame(aec, StepMode::Predict, OptimizerKind::Nlms, nullptr) ==
        doctest::Approx(1856.0).epsilon(1e-12));
  // Two optimizer calls and four passes in the twice-updated schedule.
  CHECK(aec_flops_per_frame(aec, StepMode::PredictUpdateTwice, OptimizerKind::Kalman, nullptr) ==
        doctest::Approx(3584.0).epsilon(1e-12));

  NetConfig n;
  n.hidden = 4;
  n.taps = 2;
  n.bins = 9;
  n.band = 5;
  // Two bands of (4*40 + 12*16 + 20*4) MACs.
  CHECK(net_flops_per_step(n) == doctest::Approx(6912.0).epsilon(1e-12));
  CHECK(encode_flops(n) == doctest::Approx(576.0).epsilon(1e-12));
  CHECK(aec_flops_per_frame(aec, StepMode::Predict, OptimizerKind::Net, &n) ==
        doctest::Approx(1280.0 + 288.0 + 6912.0 + 576.0).epsilon(1e-12));

  GscConfig arr;
  arr.frame = tiny;
  arr.mics = 3;
  CHECK(gsc_flops_per_frame(arr, StepMode::Predict, OptimizerKind::Nlms, nullptr) ==
        doctest::Approx(5.0 * 320.0 + 432.0 + 432.0 + 432.0).epsilon(1e-12));

  CHECK(flops_per_second(100.0, FrameConfig{512, 256}, 16000) ==
        doctest::Approx(6250.0).epsilon(1e-12));
}

TEST_CASE("cost model scaling matches the published complexity pattern") {
  MdfConfig aec{FrameConfig{512, 256}, 8};
  NetConfig small, med, large;
  small.hidden = 16;
  med.hidden = 32;
  large.hidden = 64;

  // Controller-only growth between the two larger sizes.
  const double ratio = net_flops_per_step(large) / net_flops_per_step(med);
  CHECK(ratio > 3.2);
  CHECK(ratio < 4.2);

  // Doubling the update count roughly doubles the whole-frame cost.
  const double pu = aec_flops_per_frame(aec, StepMode::PredictUpdate, OptimizerKind::Net, &med);
  const double pux2 =
      aec_flops_per_frame(aec, StepMode::PredictUpdateTwice, OptimizerKind::Net, &med);
  CHECK(pux2 / pu > 1.8);
  CHECK(pux2 / pu < 2.1);
}
