#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "afkit/common.hpp"
#include "afkit/filters.hpp"

namespace afkit {

// Synthetic test-signal generation. Everything here is a pure function of a
// 64-bit seed plus the parameter struct, so datasets are stored as seeds and
// regenerated on demand instead of being kept on disk or in RAM.

// Speech-shaped excitation: per-segment resonator-filtered noise with a
// syllabic on/off envelope and raised-cosine ramps. Active-region RMS is
// normalized to 1; pauses are digital silence. When `active` is given it
// receives a per-sample voicing flag aligned with the envelope.
std::vector<double> speechlike_source(Rng& rng, std::size_t len, unsigned sample_rate,
                                      std::vector<std::uint8_t>* active = nullptr);

// Random echo path: a unit direct tap after 0..max_delay_s of dead time,
// followed by an exponentially decaying noise tail reaching -60 dB at rt60.
// Normalized to unit l2 norm.
std::vector<double> synth_echo_path(Rng& rng, std::size_t taps, double rt60_s,
                                    unsigned sample_rate, double max_delay_s);

// Memoryless loudspeaker distortion: hard clip at the 80th percentile of the
// absolute signal, then a cubic soft curve, rescaled back to the input RMS.
std::vector<double> loudspeaker_distortion(const std::vector<double>& x);

// Windowed-sinc fractional delay (61-tap Hann-windowed kernel). Negative
// delays advance the signal; edges are zero-padded.
std::vector<double> fractional_delay(const std::vector<double>& x, double delay_samples);

struct AecSceneParams {
  double duration_s = 4.0;
  unsigned sample_rate = 16000;
  std::size_t echo_taps = 2048;
  double max_direct_delay_s = 0.004;
  double rt60_min_s = 0.10, rt60_max_s = 0.50;
  double ser_min_db = -10.0, ser_max_db = 10.0;  // near speech vs echo
  double snr_min_db = 0.0, snr_max_db = 30.0;    // near speech vs noise
  bool distorted_far_end = true;
  bool double_talk = true;  // near speech present at all

  void validate() const;
};

struct AecScene {
  std::vector<double> u;            // far-end reference
  std::vector<double> d;            // mic = echo + near + noise, exactly
  std::vector<double> echo;         // echo component of d
  std::vector<double> near_speech;  // zero vector when double_talk is off
  std::vector<double> noise;
  std::vector<std::uint8_t> far_active, near_active;  // per-sample voicing
  double ser_db = 0.0, snr_db = 0.0, rt60_s = 0.0;
  std::uint64_t seed = 0;
};

AecScene make_aec_scene(const AecSceneParams& p, std::uint64_t seed);

struct GscSceneParams {
  GscConfig array;
  double duration_s = 4.0;
  double doa_abs_max_deg = 60.0;
  double min_separation_deg = 15.0;
  double sir_min_db = -5.0, sir_max_db = 10.0;   // target vs directional interferer
  double snr_min_db = 10.0, snr_max_db = 30.0;   // target vs diffuse floor
  bool reverb_tails = true;                      // short per-mic scatter tails

  void validate() const;
};

struct GscScene {
  std::vector<std::vector<double>> mics;  // [mics][len]
  std::vector<double> target_ref;  // dry target, aligned to the array center
  std::vector<double> interf_ref;  // interferer as seen by the target-steered fixed beam
  double target_doa_deg = 0.0, interf_doa_deg = 0.0;
  double sir_db = 0.0, snr_db = 0.0;
  std::uint64_t seed = 0;
};

GscScene make_gsc_scene(const GscSceneParams& p, std::uint64_t seed);

// Directory serialization: float32 WAVs plus a key=value manifest carrying the
// seed and every generation parameter, so a saved scene can be regenerated
// bit-exactly or consumed by external tools.
void save_aec_scene(const std::string& dir, const AecSceneParams& p, const AecScene& s);
AecScene load_aec_scene(const std::string& dir, AecSceneParams* params_out = nullptr);

void save_gsc_scene(const std::string& dir, const GscSceneParams& p, const GscScene& s);
GscScene load_gsc_scene(const std::string& dir, GscSceneParams* params_out = nullptr);

}  // namespace afkit
