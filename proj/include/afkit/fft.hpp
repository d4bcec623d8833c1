#pragma once

#include <vector>

#include "afkit/common.hpp"

namespace afkit {

// Radix-2 transform with cached twiddles. Lengths must be powers of two.
//
// Real-signal helpers use the one-sided layout with n/2 + 1 bins. The strict
// inverse rejects spectra whose DC/Nyquist bins are not real (those cannot
// come from a real signal); the synthesis path instead projects the endpoints
// onto their real parts, because an unconstrained complex filter is free to
// leave residue there and the output must stay real.
class Fft {
 public:
  explicit Fft(std::size_t n);

  std::size_t size() const { return n_; }

  void forward(cplx* a) const;  // in place, length n
  void inverse(cplx* a) const;  // in place, includes 1/n

  std::vector<cplx> rfft(const double* x) const;           // n reals -> n/2+1 bins
  std::vector<cplx> rfft(const std::vector<double>& x) const;

  std::vector<double> irfft_strict(const std::vector<cplx>& spec) const;
  std::vector<double> irfft_real_endpoints(const std::vector<cplx>& spec) const;

  // Adjoint (transpose) of irfft_real_endpoints as a linear map from the
  // 2*(n/2+1) real parameters of spec to n output samples. Endpoint
  // imaginary parts are dead inputs, so their adjoints come back zero.
  std::vector<cplx> irfft_real_endpoints_adjoint(const double* xbar) const;

 private:
  std::vector<double> irfft_impl(const std::vector<cplx>& spec) const;

  std::size_t n_;
  std::vector<std::size_t> rev_;
  std::vector<cplx> tw_;  // twiddles for each stage, packed
};

// Overlap-add convolution, truncated to x.size() samples (same coverage as a
// direct-form loop that never reads past the end of x). Orders of magnitude
// faster than the direct form for the 2k-tap impulse responses scene
// generation deals in.
std::vector<double> fft_convolve(const std::vector<double>& x,
                                 const std::vector<double>& h);

}  // namespace afkit
