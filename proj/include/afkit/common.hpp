#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace afkit {

using cplx = std::complex<double>;

// Errors carry a coarse category so the CLI can map them to exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline bool is_pow2(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

// Streaming frame geometry. One-sided spectra carry bins() = n/2 + 1 bins.
struct FrameConfig {
  std::size_t n = 512;   // transform length, power of two
  std::size_t hop = 256; // new samples per step, hop <= n
  std::size_t bins() const { return n / 2 + 1; }
  void validate() const {
    if (!is_pow2(n)) throw ConfigError("frame length must be a power of two");
    if (hop == 0 || hop > n) throw ConfigError("hop must be in (0, n]");
  }
};

// Latency of the analyze -> filter -> synthesize chain, in samples.
inline std::size_t pipeline_latency(const FrameConfig& fc) { return fc.n - fc.hop; }

// Deterministic RNG. mt19937_64 is bit-specified by the standard; the
// distributions below are hand-rolled so sequences never depend on libstdc++
// internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform01() {
    // 53-bit mantissa in [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  std::uint64_t next_u64() { return eng_(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(eng_() % n); }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // Box-Muller on open-interval uniforms
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Stable sub-stream derivation so parallel structure stays reproducible.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0) {
    std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
    for (std::uint64_t v : {a, b, c}) {
      h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      h *= 0xbf58476d1ce4e5b9ull;
      h ^= h >> 31;
    }
    return h;
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

inline double energy(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

inline double db_pow(double ratio) { return 10.0 * std::log10(ratio); }

}  // namespace afkit
