#include "afkit/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "afkit/fft.hpp"
#include "afkit/wav.hpp"

namespace afkit {

namespace {

double db_to_pow(double db) { return std::pow(10.0, db / 10.0); }

double mean_power(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  return energy(x) / static_cast<double>(x.size());
}

// Two passes of a centered moving average give smooth (triangular-kernel)
// envelope edges without ringing.
std::vector<double> moving_avg(const std::vector<double>& x, std::size_t w) {
  if (w <= 1 || x.empty()) return x;
  std::vector<double> pref(x.size() + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) pref[i + 1] = pref[i] + x[i];
  std::vector<double> out(x.size());
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(w / 2);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
    const std::ptrdiff_t hi = std::min(n, i + half + 1);
    out[static_cast<std::size_t>(i)] = (pref[hi] - pref[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

}  // namespace

std::vector<double> speechlike_source(Rng& rng, std::size_t len, unsigned sample_rate,
                                      std::vector<std::uint8_t>* active) {
  if (sample_rate == 0) throw ConfigError("speechlike_source: zero sample rate");
  std::vector<double> out(len, 0.0);
  std::vector<std::uint8_t> act(len, 0);
  if (len == 0) {
    if (active) active->clear();
    return out;
  }
  const double fs = static_cast<double>(sample_rate);
  const std::size_t ramp = std::max<std::size_t>(4, sample_rate / 125);  // ~8 ms

  std::vector<double> amp(len, 0.0);
  double y1 = 0.0, y2 = 0.0;  // resonator state, carried across segments
  std::size_t t = 0;
  while (t < len) {
    const std::size_t dur = std::max<std::size_t>(
        2 * ramp, static_cast<std::size_t>(std::lround(rng.uniform(0.06, 0.35) * fs)));
    const bool voiced = rng.uniform01() < 0.65;
    const double seg_amp = std::exp(0.4 * rng.gaussian());
    const double f0 = rng.uniform(150.0, 2800.0);
    const double bw = rng.uniform(120.0, 400.0);
    const double r = std::exp(-M_PI * bw / fs);
    const double c1 = 2.0 * r * std::cos(2.0 * M_PI * f0 / fs);
    const double c2 = -r * r;
    const std::size_t end = std::min(len, t + dur);

    double seg_pow = 0.0;
    for (std::size_t i = t; i < end; ++i) {
      const double y = c1 * y1 + c2 * y2 + rng.gaussian();
      y2 = y1;
      y1 = y;
      out[i] = y;
      seg_pow += y * y;
    }
    // Per-segment unit RMS so the resonator Q does not dominate the
    // lognormal level variation.
    const double seg_rms = std::sqrt(seg_pow / static_cast<double>(end - t));
    if (seg_rms > 0.0)
      for (std::size_t i = t; i < end; ++i) out[i] /= seg_rms;
    for (std::size_t i = t; i < end; ++i) {
      amp[i] = voiced ? seg_amp : 0.0;
      act[i] = voiced ? 1 : 0;
    }
    t = end;
  }

  const std::vector<double> env = moving_avg(moving_avg(amp, ramp), ramp);
  double act_pow = 0.0;
  std::size_t act_count = 0;
  for (std::size_t i = 0; i < len; ++i) {
    out[i] *= env[i];
    if (act[i]) {
      act_pow += out[i] * out[i];
      ++act_count;
    }
  }
  if (act_count > 0 && act_pow > 0.0) {
    const double g = 1.0 / std::sqrt(act_pow / static_cast<double>(act_count));
    for (double& v : out) v *= g;
  }
  if (active) *active = std::move(act);
  return out;
}

std::vector<double> synth_echo_path(Rng& rng, std::size_t taps, double rt60_s,
                                    unsigned sample_rate, double max_delay_s) {
  if (taps == 0) throw ConfigError("synth_echo_path: zero taps");
  if (rt60_s <= 0.0 || max_delay_s < 0.0 || sample_rate == 0)
    throw ConfigError("synth_echo_path: bad parameters");
  std::vector<double> ir(taps, 0.0);
  std::size_t delay =
      static_cast<std::size_t>(std::lround(rng.uniform(0.0, max_delay_s) * sample_rate));
  if (delay >= taps) delay = taps - 1;
  ir[delay] = 1.0;
  // Amplitude reaches -60 dB at rt60: exp(-t/tau) with tau = rt60*fs/ln(1e3).
  const double tau = rt60_s * static_cast<double>(sample_rate) / 6.907755278982137;
  for (std::size_t i = delay + 1; i < taps; ++i)
    ir[i] = 0.35 * rng.gaussian() * std::exp(-static_cast<double>(i - delay) / tau);
  const double norm = std::sqrt(energy(ir));
  for (double& v : ir) v /= norm;
  return ir;
}

std::vector<double> loudspeaker_distortion(const std::vector<double>& x) {
  if (x.empty()) return x;
  std::vector<double> mag(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) mag[i] = std::abs(x[i]);
  const std::size_t idx = (mag.size() - 1) * 4 / 5;
  std::nth_element(mag.begin(), mag.begin() + static_cast<std::ptrdiff_t>(idx), mag.end());
  const double clip = mag[idx];
  if (clip <= 0.0) return x;  // mostly-silent input, nothing to distort
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double c = std::clamp(x[i], -clip, clip);
    y[i] = 0.5 * c + 0.3 * c * c * c;
  }
  const double py = mean_power(y);
  if (py > 0.0) {
    const double g = std::sqrt(mean_power(x) / py);
    for (double& v : y) v *= g;
  }
  return y;
}

std::vector<double> fractional_delay(const std::vector<double>& x, double delay_samples) {
  constexpr std::ptrdiff_t kHalf = 30;  // 61-tap kernel
  const double floor_d = std::floor(delay_samples);
  const double frac = delay_samples - floor_d;
  const auto base = static_cast<std::ptrdiff_t>(floor_d);

  double kernel[2 * kHalf + 1];
  double ksum = 0.0;
  for (std::ptrdiff_t i = -kHalf; i <= kHalf; ++i) {
    const double s = static_cast<double>(i) - frac;
    const double sinc = (s == 0.0) ? 1.0 : std::sin(M_PI * s) / (M_PI * s);
    const double win = 0.5 * (1.0 + std::cos(M_PI * s / (kHalf + 1)));
    kernel[i + kHalf] = sinc * std::max(0.0, win);
    ksum += kernel[i + kHalf];
  }
  for (double& k : kernel) k /= ksum;  // exact unity DC gain

  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> out(x.size(), 0.0);
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (std::ptrdiff_t i = -kHalf; i <= kHalf; ++i) {
      const std::ptrdiff_t src = t - base - i;
      if (src >= 0 && src < n) acc += kernel[i + kHalf] * x[src];
    }
    out[static_cast<std::size_t>(t)] = acc;
  }
  return out;
}

void AecSceneParams::validate() const {
  if (duration_s <= 0.0 || sample_rate == 0) throw ConfigError("aec scene: bad duration/rate");
  if (echo_taps == 0) throw ConfigError("aec scene: zero echo taps");
  if (rt60_min_s <= 0.0 || rt60_max_s < rt60_min_s) throw ConfigError("aec scene: bad rt60 range");
  if (ser_max_db < ser_min_db || snr_max_db < snr_min_db)
    throw ConfigError("aec scene: bad level range");
  if (max_direct_delay_s < 0.0) throw ConfigError("aec scene: negative delay");
}

AecScene make_aec_scene(const AecSceneParams& p, std::uint64_t seed) {
  p.validate();
  const auto len = static_cast<std::size_t>(std::lround(p.duration_s * p.sample_rate));
  if (len == 0) throw ConfigError("aec scene: empty");

  Rng far_rng(Rng::derive(seed, 0xA5C0));
  Rng near_rng(Rng::derive(seed, 0xA5C1));
  Rng ir_rng(Rng::derive(seed, 0xA5C2));
  Rng noise_rng(Rng::derive(seed, 0xA5C3));
  Rng par_rng(Rng::derive(seed, 0xA5C4));

  AecScene s;
  s.seed = seed;
  s.rt60_s = par_rng.uniform(p.rt60_min_s, p.rt60_max_s);
  s.ser_db = par_rng.uniform(p.ser_min_db, p.ser_max_db);
  s.snr_db = par_rng.uniform(p.snr_min_db, p.snr_max_db);

  s.u = speechlike_source(far_rng, len, p.sample_rate, &s.far_active);
  const std::vector<double> ir =
      synth_echo_path(ir_rng, p.echo_taps, s.rt60_s, p.sample_rate, p.max_direct_delay_s);
  s.echo = fft_convolve(p.distorted_far_end ? loudspeaker_distortion(s.u) : s.u, ir);

  if (p.double_talk) {
    s.near_speech = speechlike_source(near_rng, len, p.sample_rate, &s.near_active);
  } else {
    s.near_speech.assign(len, 0.0);
    s.near_active.assign(len, 0);
  }
  s.noise.resize(len);
  for (double& v : s.noise) v = noise_rng.gaussian();

  // Echo is leveled against near speech when there is any (SER), and the
  // noise floor against whichever of the two anchors exists (SNR).
  const double pe = mean_power(s.echo);
  const double ps = mean_power(s.near_speech);
  double ge = 0.0;
  if (ps > 0.0)
    ge = (pe > 0.0) ? std::sqrt(ps / (pe * db_to_pow(s.ser_db))) : 0.0;
  else
    ge = (pe > 0.0) ? 1.0 / std::sqrt(pe) : 0.0;
  for (double& v : s.echo) v *= ge;
  const double anchor = (ps > 0.0) ? ps : mean_power(s.echo);
  const double pn = mean_power(s.noise);
  const double gn = (pn > 0.0 && anchor > 0.0) ? std::sqrt(anchor / (pn * db_to_pow(s.snr_db))) : 0.0;
  for (double& v : s.noise) v *= gn;

  s.d.resize(len);
  for (std::size_t i = 0; i < len; ++i) s.d[i] = s.echo[i] + s.near_speech[i] + s.noise[i];
  return s;
}

void GscSceneParams::validate() const {
  if (duration_s <= 0.0) throw ConfigError("gsc scene: bad duration");
  if (array.mics < 2) throw ConfigError("gsc scene: need at least two mics");
  if (doa_abs_max_deg <= 0.0 || doa_abs_max_deg > 90.0)
    throw ConfigError("gsc scene: bad doa range");
  if (min_separation_deg <= 0.0 || min_separation_deg >= 2.0 * doa_abs_max_deg)
    throw ConfigError("gsc scene: bad separation");
  if (sir_max_db < sir_min_db || snr_max_db < snr_min_db)
    throw ConfigError("gsc scene: bad level range");
}

GscScene make_gsc_scene(const GscSceneParams& p, std::uint64_t seed) {
  p.validate();
  const unsigned fs = p.array.sample_rate;
  const auto len = static_cast<std::size_t>(std::lround(p.duration_s * fs));
  if (len == 0) throw ConfigError("gsc scene: empty");
  const std::size_t m = p.array.mics;

  Rng tgt_rng(Rng::derive(seed, 0xB5C0));
  Rng int_rng(Rng::derive(seed, 0xB5C1));
  Rng noise_rng(Rng::derive(seed, 0xB5C2));
  Rng par_rng(Rng::derive(seed, 0xB5C3));
  Rng tail_rng(Rng::derive(seed, 0xB5C4));

  GscScene s;
  s.seed = seed;
  s.target_doa_deg = par_rng.uniform(-p.doa_abs_max_deg, p.doa_abs_max_deg);
  s.interf_doa_deg = s.target_doa_deg;
  for (int tries = 0; tries < 64; ++tries) {
    const double cand = par_rng.uniform(-p.doa_abs_max_deg, p.doa_abs_max_deg);
    if (std::abs(cand - s.target_doa_deg) >= p.min_separation_deg) {
      s.interf_doa_deg = cand;
      break;
    }
  }
  if (std::abs(s.interf_doa_deg - s.target_doa_deg) < p.min_separation_deg)
    s.interf_doa_deg = s.target_doa_deg >= 0.0 ? s.target_doa_deg - p.min_separation_deg
                                               : s.target_doa_deg + p.min_separation_deg;
  s.sir_db = par_rng.uniform(p.sir_min_db, p.sir_max_db);
  s.snr_db = par_rng.uniform(p.snr_min_db, p.snr_max_db);

  const std::vector<double> dry_t = speechlike_source(tgt_rng, len, fs);
  const std::vector<double> dry_i = speechlike_source(int_rng, len, fs);
  const std::vector<double> del_t = mic_delays_samples(p.array, s.target_doa_deg);
  const std::vector<double> del_i = mic_delays_samples(p.array, s.interf_doa_deg);

  auto make_tail = [&]() {
    // Short scatter tail: unit direct tap plus ~40 ms decaying noise.
    std::vector<double> k(256, 0.0);
    k[0] = 1.0;
    const double tau = 0.04 * fs / 6.907755278982137;
    for (std::size_t i = 1; i < k.size(); ++i)
      k[i] = 0.12 * tail_rng.gaussian() * std::exp(-static_cast<double>(i) / tau);
    return k;
  };

  std::vector<std::vector<double>> img_t(m), img_i(m);
  for (std::size_t c = 0; c < m; ++c) {
    img_t[c] = fractional_delay(dry_t, del_t[c]);
    img_i[c] = fractional_delay(dry_i, del_i[c]);
    if (p.reverb_tails) {
      img_t[c] = fft_convolve(img_t[c], make_tail());
      img_i[c] = fft_convolve(img_i[c], make_tail());
    }
  }

  double pt = 0.0, pi = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    pt += mean_power(img_t[c]);
    pi += mean_power(img_i[c]);
  }
  pt /= static_cast<double>(m);
  pi /= static_cast<double>(m);
  const double gi = (pi > 0.0 && pt > 0.0) ? std::sqrt(pt / (pi * db_to_pow(s.sir_db))) : 0.0;

  std::vector<std::vector<double>> nz(m, std::vector<double>(len));
  double pn = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    for (double& v : nz[c]) v = noise_rng.gaussian();
    pn += mean_power(nz[c]);
  }
  pn /= static_cast<double>(m);
  const double gn = (pn > 0.0 && pt > 0.0) ? std::sqrt(pt / (pn * db_to_pow(s.snr_db))) : 0.0;

  s.mics.assign(m, std::vector<double>(len));
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t i = 0; i < len; ++i)
      s.mics[c][i] = img_t[c][i] + gi * img_i[c][i] + gn * nz[c][i];

  s.target_ref = dry_t;
  // Interference as the target-steered delay-and-sum beam would pass it.
  s.interf_ref.assign(len, 0.0);
  for (std::size_t c = 0; c < m; ++c) {
    const std::vector<double> aligned = fractional_delay(img_i[c], -del_t[c]);
    for (std::size_t i = 0; i < len; ++i) s.interf_ref[i] += aligned[i];
  }
  const double scale = gi / static_cast<double>(m);
  for (double& v : s.interf_ref) v *= scale;
  return s;
}

namespace {

std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  for (const auto& [k, v] : kv) f << k << '=' << v << '\n';
  if (!f) throw IoError("short write on " + path);
}

std::map<std::string, std::string> read_manifest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("bad manifest line in " + path);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

const std::string& need_key(const std::map<std::string, std::string>& kv,
                            const std::string& key, const std::string& path) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw IoError("manifest missing " + key + " in " + path);
  return it->second;
}

double need_double(const std::map<std::string, std::string>& kv, const std::string& key,
                   const std::string& path) {
  return std::stod(need_key(kv, key, path));
}

std::uint64_t need_u64(const std::map<std::string, std::string>& kv, const std::string& key,
                       const std::string& path) {
  return std::stoull(need_key(kv, key, path));
}

std::vector<std::uint8_t> mask_from_wav(const std::vector<double>& x) {
  std::vector<std::uint8_t> m(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) m[i] = x[i] > 0.5 ? 1 : 0;
  return m;
}

std::vector<double> mask_to_wav(const std::vector<std::uint8_t>& m) {
  std::vector<double> x(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) x[i] = m[i] ? 1.0 : 0.0;
  return x;
}

}  // namespace

void save_aec_scene(const std::string& dir, const AecSceneParams& p, const AecScene& s) {
  std::filesystem::create_directories(dir);
  const unsigned fs = p.sample_rate;
  write_wav_mono(dir + "/u.wav", s.u, fs);
  write_wav_mono(dir + "/d.wav", s.d, fs);
  write_wav_mono(dir + "/echo.wav", s.echo, fs);
  write_wav_mono(dir + "/near.wav", s.near_speech, fs);
  write_wav_mono(dir + "/noise.wav", s.noise, fs);
  write_wav_mono(dir + "/far_active.wav", mask_to_wav(s.far_active), fs, WavFormat::Pcm16);
  write_wav_mono(dir + "/near_active.wav", mask_to_wav(s.near_active), fs, WavFormat::Pcm16);
  write_manifest(dir + "/scene.txt",
                 {{"type", "aec"},
                  {"seed", std::to_string(s.seed)},
                  {"sample_rate", std::to_string(p.sample_rate)},
                  {"duration_s", fmt_double(p.duration_s)},
                  {"echo_taps", std::to_string(p.echo_taps)},
                  {"max_direct_delay_s", fmt_double(p.max_direct_delay_s)},
                  {"rt60_min_s", fmt_double(p.rt60_min_s)},
                  {"rt60_max_s", fmt_double(p.rt60_max_s)},
                  {"ser_min_db", fmt_double(p.ser_min_db)},
                  {"ser_max_db", fmt_double(p.ser_max_db)},
                  {"snr_min_db", fmt_double(p.snr_min_db)},
                  {"snr_max_db", fmt_double(p.snr_max_db)},
                  {"distorted_far_end", p.distorted_far_end ? "1" : "0"},
                  {"double_talk", p.double_talk ? "1" : "0"},
                  {"rt60_s", fmt_double(s.rt60_s)},
                  {"ser_db", fmt_double(s.ser_db)},
                  {"snr_db", fmt_double(s.snr_db)}});
}

AecScene load_aec_scene(const std::string& dir, AecSceneParams* params_out) {
  const std::string mpath = dir + "/scene.txt";
  const auto kv = read_manifest(mpath);
  if (need_key(kv, "type", mpath) != "aec") throw IoError("not an echo scene: " + dir);
  AecSceneParams p;
  p.sample_rate = static_cast<unsigned>(need_u64(kv, "sample_rate", mpath));
  p.duration_s = need_double(kv, "duration_s", mpath);
  p.echo_taps = need_u64(kv, "echo_taps", mpath);
  p.max_direct_delay_s = need_double(kv, "max_direct_delay_s", mpath);
  p.rt60_min_s = need_double(kv, "rt60_min_s", mpath);
  p.rt60_max_s = need_double(kv, "rt60_max_s", mpath);
  p.ser_min_db = need_double(kv, "ser_min_db", mpath);
  p.ser_max_db = need_double(kv, "ser_max_db", mpath);
  p.snr_min_db = need_double(kv, "snr_min_db", mpath);
  p.snr_max_db = need_double(kv, "snr_max_db", mpath);
  p.distorted_far_end = need_key(kv, "distorted_far_end", mpath) == "1";
  p.double_talk = need_key(kv, "double_talk", mpath) == "1";
  if (params_out) *params_out = p;

  AecScene s;
  s.seed = need_u64(kv, "seed", mpath);
  s.rt60_s = need_double(kv, "rt60_s", mpath);
  s.ser_db = need_double(kv, "ser_db", mpath);
  s.snr_db = need_double(kv, "snr_db", mpath);
  s.u = read_wav_mono(dir + "/u.wav", p.sample_rate);
  s.d = read_wav_mono(dir + "/d.wav", p.sample_rate);
  s.echo = read_wav_mono(dir + "/echo.wav", p.sample_rate);
  s.near_speech = read_wav_mono(dir + "/near.wav", p.sample_rate);
  s.noise = read_wav_mono(dir + "/noise.wav", p.sample_rate);
  s.far_active = mask_from_wav(read_wav_mono(dir + "/far_active.wav", p.sample_rate));
  s.near_active = mask_from_wav(read_wav_mono(dir + "/near_active.wav", p.sample_rate));
  return s;
}

void save_gsc_scene(const std::string& dir, const GscSceneParams& p, const GscScene& s) {
  std::filesystem::create_directories(dir);
  const unsigned fs = p.array.sample_rate;
  WavData mics;
  mics.sample_rate = fs;
  mics.channels = s.mics;
  write_wav(dir + "/mics.wav", mics);
  write_wav_mono(dir + "/target_ref.wav", s.target_ref, fs);
  write_wav_mono(dir + "/interf_ref.wav", s.interf_ref, fs);
  write_manifest(dir + "/scene.txt",
                 {{"type", "gsc"},
                  {"seed", std::to_string(s.seed)},
                  {"mics", std::to_string(p.array.mics)},
                  {"spacing_m", fmt_double(p.array.spacing_m)},
                  {"speed_of_sound", fmt_double(p.array.speed_of_sound)},
                  {"sample_rate", std::to_string(fs)},
                  {"frame_n", std::to_string(p.array.frame.n)},
                  {"frame_hop", std::to_string(p.array.frame.hop)},
                  {"duration_s", fmt_double(p.duration_s)},
                  {"doa_abs_max_deg", fmt_double(p.doa_abs_max_deg)},
                  {"min_separation_deg", fmt_double(p.min_separation_deg)},
                  {"sir_min_db", fmt_double(p.sir_min_db)},
                  {"sir_max_db", fmt_double(p.sir_max_db)},
                  {"snr_min_db", fmt_double(p.snr_min_db)},
                  {"snr_max_db", fmt_double(p.snr_max_db)},
                  {"reverb_tails", p.reverb_tails ? "1" : "0"},
                  {"target_doa_deg", fmt_double(s.target_doa_deg)},
                  {"interf_doa_deg", fmt_double(s.interf_doa_deg)},
                  {"sir_db", fmt_double(s.sir_db)},
                  {"snr_db", fmt_double(s.snr_db)}});
}

GscScene load_gsc_scene(const std::string& dir, GscSceneParams* params_out) {
  const std::string mpath = dir + "/scene.txt";
  const auto kv = read_manifest(mpath);
  if (need_key(kv, "type", mpath) != "gsc") throw IoError("not an array scene: " + dir);
  GscSceneParams p;
  p.array.mics = need_u64(kv, "mics", mpath);
  p.array.spacing_m = need_double(kv, "spacing_m", mpath);
  p.array.speed_of_sound = need_double(kv, "speed_of_sound", mpath);
  p.array.sample_rate = static_cast<unsigned>(need_u64(kv, "sample_rate", mpath));
  p.array.frame.n = need_u64(kv, "frame_n", mpath);
  p.array.frame.hop = need_u64(kv, "frame_hop", mpath);
  p.duration_s = need_double(kv, "duration_s", mpath);
  p.doa_abs_max_deg = need_double(kv, "doa_abs_max_deg", mpath);
  p.min_separation_deg = need_double(kv, "min_separation_deg", mpath);
  p.sir_min_db = need_double(kv, "sir_min_db", mpath);
  p.sir_max_db = need_double(kv, "sir_max_db", mpath);
  p.snr_min_db = need_double(kv, "snr_min_db", mpath);
  p.snr_max_db = need_double(kv, "snr_max_db", mpath);
  p.reverb_tails = need_key(kv, "reverb_tails", mpath) == "1";
  if (params_out) *params_out = p;

  GscScene s;
  s.seed = need_u64(kv, "seed", mpath);
  s.target_doa_deg = need_double(kv, "target_doa_deg", mpath);
  s.interf_doa_deg = need_double(kv, "interf_doa_deg", mpath);
  s.sir_db = need_double(kv, "sir_db", mpath);
  s.snr_db = need_double(kv, "snr_db", mpath);
  WavData mics = read_wav(dir + "/mics.wav");
  if (mics.sample_rate != p.array.sample_rate) throw IoError("sample rate mismatch in " + dir);
  if (mics.channels.size() != p.array.mics) throw IoError("mic count mismatch in " + dir);
  s.mics = std::move(mics.channels);
  s.target_ref = read_wav_mono(dir + "/target_ref.wav", p.array.sample_rate);
  s.interf_ref = read_wav_mono(dir + "/interf_ref.wav", p.array.sample_rate);
  return s;
}

}  // namespace afkit
