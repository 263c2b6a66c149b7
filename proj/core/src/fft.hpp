#pragma once

// Internal radix-2 FFT used by the convolution fast path and the
// lattice correlations. Deliberately self-contained and allocation-local
// so concurrent callers never share state.

#include <complex>
#include <cstddef>
#include <vector>

namespace drflow::detail {

/// Smallest power of two >= n.
std::size_t next_pow2(std::size_t n);

/// In-place iterative radix-2 FFT; sign = -1 forward, +1 inverse.
/// data.size() must be a power of two. The inverse applies the 1/n factor.
void fft_inplace(std::vector<std::complex<double>>& data, int sign);

/// Linear convolution of two real sequences (length a+b-1).
std::vector<double> fft_convolve(const std::vector<double>& a,
                                 const std::vector<double>& b);

/// Correlation c[i] = sum_j a[j] * f[i + j], for i = 0..f.size()-1.
/// Out-of-range f indices contribute nothing (caller pads f as needed).
std::vector<double> fft_correlate(const std::vector<double>& a,
                                  const std::vector<double>& f);

} // namespace drflow::detail
