#include "afkit/fft.hpp"

#include <cmath>

namespace afkit {

namespace {
constexpr double kTau = 6.283185307179586476925286766559;
}

Fft::Fft(std::size_t n) : n_(n) {
  if (!is_pow2(n)) throw ConfigError("fft length must be a power of two");
  rev_.resize(n);
  std::size_t lg = 0;
  while ((1ull << lg) < n) ++lg;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < lg; ++b)
      if (i & (1ull << b)) r |= 1ull << (lg - 1 - b);
    rev_[i] = r;
  }
  // Stage m uses twiddles exp(-i*tau*j/m) for j in [0, m/2); pack them all.
  tw_.reserve(n);
  for (std::size_t m = 2; m <= n; m <<= 1)
    for (std::size_t j = 0; j < m / 2; ++j) {
      const double ang = -kTau * static_cast<double>(j) / static_cast<double>(m);
      tw_.emplace_back(std::cos(ang), std::sin(ang));
    }
}

void Fft::forward(cplx* a) const {
  const std::size_t n = n_;
  for (std::size_t i = 0; i < n; ++i)
    if (rev_[i] > i) std::swap(a[i], a[rev_[i]]);
  std::size_t toff = 0;
  for (std::size_t m = 2; m <= n; m <<= 1) {
    const std::size_t half = m / 2;
    for (std::size_t k = 0; k < n; k += m) {
      for (std::size_t j = 0; j < half; ++j) {
        const cplx w = tw_[toff + j];
        const cplx t = w * a[k + j + half];
        const cplx u = a[k + j];
        a[k + j] = u + t;
        a[k + j + half] = u - t;
      }
    }
    toff += half;
  }
}

void Fft::inverse(cplx* a) const {
  const std::size_t n = n_;
  for (std::size_t i = 0; i < n; ++i) a[i] = std::conj(a[i]);
  forward(a);
  const double s = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = std::conj(a[i]) * s;
}

std::vector<cplx> Fft::rfft(const double* x) const {
  std::vector<cplx> a(n_);
  for (std::size_t i = 0; i < n_; ++i) a[i] = cplx(x[i], 0.0);
  forward(a.data());
  a.resize(n_ / 2 + 1);
  return a;
}

std::vector<cplx> Fft::rfft(const std::vector<double>& x) const {
  if (x.size() != n_) throw ConfigError("rfft input length mismatch");
  return rfft(x.data());
}

std::vector<double> Fft::irfft_impl(const std::vector<cplx>& spec) const {
  const std::size_t k = n_ / 2 + 1;
  if (spec.size() != k) throw ConfigError("irfft spectrum length mismatch");
  std::vector<cplx> a(n_);
  a[0] = cplx(spec[0].real(), 0.0);
  a[n_ / 2] = cplx(spec[n_ / 2].real(), 0.0);
  for (std::size_t i = 1; i < n_ / 2; ++i) {
    a[i] = spec[i];
    a[n_ - i] = std::conj(spec[i]);
  }
  inverse(a.data());
  std::vector<double> out(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = a[i].real();
  return out;
}

std::vector<double> Fft::irfft_strict(const std::vector<cplx>& spec) const {
  const std::size_t k = n_ / 2 + 1;
  if (spec.size() != k) throw ConfigError("irfft spectrum length mismatch");
  const double scale = 1.0;
  const double tol = 1e-9 * (scale + std::abs(spec[0]) + std::abs(spec[k - 1]));
  if (std::abs(spec[0].imag()) > tol || std::abs(spec[k - 1].imag()) > tol)
    throw ConfigError("one-sided spectrum endpoints must be real");
  return irfft_impl(spec);
}

std::vector<double> Fft::irfft_real_endpoints(const std::vector<cplx>& spec) const {
  return irfft_impl(spec);
}

std::vector<cplx> Fft::irfft_real_endpoints_adjoint(const double* xbar) const {
  // Forward map: x[t] = (1/n) * [ S0 + 2*sum_{0<j<n/2} (Sjr cos - Sji sin) + Snyq*(-1)^t ]
  // Adjoint is a forward DFT of xbar with per-bin scaling.
  std::vector<cplx> a(n_);
  for (std::size_t i = 0; i < n_; ++i) a[i] = cplx(xbar[i], 0.0);
  forward(a.data());
  const std::size_t k = n_ / 2 + 1;
  std::vector<cplx> out(k);
  const double inv_n = 1.0 / static_cast<double>(n_);
  out[0] = cplx(a[0].real() * inv_n, 0.0);
  out[k - 1] = cplx(a[n_ / 2].real() * inv_n, 0.0);
  for (std::size_t j = 1; j < n_ / 2; ++j) out[j] = a[j] * (2.0 * inv_n);
  return out;
}

std::vector<double> fft_convolve(const std::vector<double>& x,
                                 const std::vector<double>& h) {
  if (x.empty() || h.empty()) return std::vector<double>(x.size(), 0.0);
  if (h.size() > x.size()) {
    // Rare in practice; direct form keeps the truncation semantics simple.
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t t = 0; t < x.size(); ++t)
      for (std::size_t k = 0; k <= t; ++k)
        if (k < h.size()) out[t] += h[k] * x[t - k];
    return out;
  }
  std::size_t n = 1;
  while (n < 2 * h.size()) n <<= 1;
  while (n < 4096 && n < 2 * x.size()) n <<= 1;  // amortize small kernels
  const std::size_t block = n - h.size() + 1;

  Fft fft(n);
  std::vector<double> hp(n, 0.0);
  std::copy(h.begin(), h.end(), hp.begin());
  const std::vector<cplx> hs = fft.rfft(hp);

  std::vector<double> out(x.size(), 0.0);
  std::vector<double> xp(n, 0.0);
  for (std::size_t start = 0; start < x.size(); start += block) {
    const std::size_t len = std::min(block, x.size() - start);
    std::fill(xp.begin(), xp.end(), 0.0);
    std::copy(x.begin() + start, x.begin() + start + len, xp.begin());
    std::vector<cplx> xs = fft.rfft(xp);
    for (std::size_t j = 0; j < xs.size(); ++j) xs[j] *= hs[j];
    const std::vector<double> seg = fft.irfft_strict(xs);
    const std::size_t stop = std::min(x.size() - start, n);
    for (std::size_t i = 0; i < stop; ++i) out[start + i] += seg[i];
  }
  return out;
}

}  // namespace afkit
