#include "afkit/wav.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace afkit {

namespace {

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open wav file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw IoError("not a RIFF/WAVE file: " + path);

  std::uint16_t fmt_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t len = get_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) throw IoError("truncated wav chunk: " + path);
    if (std::memcmp(id, "fmt ", 4) == 0 && len >= 16) {
      fmt_tag = get_u16(bytes.data() + body);
      channels = get_u16(bytes.data() + body + 2);
      rate = get_u32(bytes.data() + body + 4);
      bits = get_u16(bytes.data() + body + 14);
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1);
  }
  if (!data || channels == 0) throw IoError("wav missing fmt/data: " + path);

  WavData w;
  w.sample_rate = rate;
  w.channels.assign(channels, {});
  if (fmt_tag == 1 && bits == 16) {
    const std::size_t nfr = data_len / (2u * channels);
    for (auto& c : w.channels) c.resize(nfr);
    for (std::size_t t = 0; t < nfr; ++t)
      for (std::size_t c = 0; c < channels; ++c) {
        const unsigned char* p = data + 2 * (t * channels + c);
        const std::int16_t v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
        w.channels[c][t] = static_cast<double>(v) / 32768.0;
      }
  } else if (fmt_tag == 3 && bits == 32) {
    const std::size_t nfr = data_len / (4u * channels);
    for (auto& c : w.channels) c.resize(nfr);
    for (std::size_t t = 0; t < nfr; ++t)
      for (std::size_t c = 0; c < channels; ++c) {
        float v;
        std::memcpy(&v, data + 4 * (t * channels + c), 4);
        w.channels[c][t] = static_cast<double>(v);
      }
  } else {
    throw IoError("unsupported wav encoding (want pcm16 or float32): " + path);
  }
  return w;
}

void write_wav(const std::string& path, const WavData& w, WavFormat fmt) {
  if (w.channels.empty()) throw ConfigError("wav write needs at least one channel");
  const std::size_t nch = w.channels.size(), nfr = w.frames();
  for (const auto& c : w.channels)
    if (c.size() != nfr) throw ConfigError("wav channels must share a length");

  const std::uint16_t bytes_per = (fmt == WavFormat::Pcm16) ? 2 : 4;
  const std::uint32_t data_len = static_cast<std::uint32_t>(nfr * nch * bytes_per);

  std::string s;
  s.reserve(44 + data_len);
  s += "RIFF";
  put_u32(s, 36 + data_len);
  s += "WAVE";
  s += "fmt ";
  put_u32(s, 16);
  put_u16(s, fmt == WavFormat::Pcm16 ? 1 : 3);
  put_u16(s, static_cast<std::uint16_t>(nch));
  put_u32(s, w.sample_rate);
  put_u32(s, w.sample_rate * nch * bytes_per);
  put_u16(s, static_cast<std::uint16_t>(nch * bytes_per));
  put_u16(s, static_cast<std::uint16_t>(8 * bytes_per));
  s += "data";
  put_u32(s, data_len);
  for (std::size_t t = 0; t < nfr; ++t)
    for (std::size_t c = 0; c < nch; ++c) {
      const double v = w.channels[c][t];
      if (fmt == WavFormat::Pcm16) {
        const double clamped = std::clamp(v, -1.0, 32767.0 / 32768.0);
        const auto q = static_cast<std::int16_t>(std::lrint(clamped * 32768.0));
        put_u16(s, static_cast<std::uint16_t>(q));
      } else {
        const float fv = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &fv, 4);
        put_u32(s, u);
      }
    }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write wav file: " + path);
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!f) throw IoError("short write on wav file: " + path);
}

std::vector<double> read_wav_mono(const std::string& path, unsigned expect_rate) {
  WavData w = read_wav(path);
  if (expect_rate != 0 && w.sample_rate != expect_rate)
    throw IoError("unexpected sample rate in " + path);
  if (w.channels.size() != 1) throw IoError("expected mono wav: " + path);
  return std::move(w.channels[0]);
}

void write_wav_mono(const std::string& path, const std::vector<double>& x, unsigned rate,
                    WavFormat fmt) {
  WavData w;
  w.sample_rate = rate;
  w.channels.push_back(x);
  write_wav(path, w, fmt);
}

}  // namespace afkit
