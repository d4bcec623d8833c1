#pragma once

#include <string>
#include <vector>

#include "afkit/common.hpp"

namespace afkit {

// Minimal RIFF/WAVE support: 16-bit PCM and 32-bit IEEE float, any channel
// count. Samples are kept as doubles, channel-major (data[ch][t]).
struct WavData {
  unsigned sample_rate = 16000;
  std::vector<std::vector<double>> channels;

  std::size_t frames() const { return channels.empty() ? 0 : channels[0].size(); }
};

enum class WavFormat { Pcm16, Float32 };

WavData read_wav(const std::string& path);
void write_wav(const std::string& path, const WavData& w, WavFormat fmt = WavFormat::Float32);

// Mono convenience wrappers.
std::vector<double> read_wav_mono(const std::string& path, unsigned expect_rate = 0);
void write_wav_mono(const std::string& path, const std::vector<double>& x, unsigned rate,
                    WavFormat fmt = WavFormat::Float32);

}  // namespace afkit
