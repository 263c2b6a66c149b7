#include "fft.hpp"

#include <cmath>
#include <numbers>

namespace drflow::detail {

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft_inplace(std::vector<std::complex<double>>& data, int sign) {
    const std::size_t n = data.size();
    if (n <= 1) return;

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = data[i + k];
                const std::complex<double> v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }

    if (sign > 0) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& x : data) x *= inv;
    }
}

std::vector<double> fft_convolve(const std::vector<double>& a,
                                 const std::vector<double>& b) {
    if (a.empty() || b.empty()) return {};
    const std::size_t out_len = a.size() + b.size() - 1;
    const std::size_t n = next_pow2(out_len);

    std::vector<std::complex<double>> fa(n), fb(n);
    for (std::size_t i = 0; i < a.size(); ++i) fa[i] = a[i];
    for (std::size_t i = 0; i < b.size(); ++i) fb[i] = b[i];
    fft_inplace(fa, -1);
    fft_inplace(fb, -1);
    for (std::size_t i = 0; i < n; ++i) fa[i] *= fb[i];
    fft_inplace(fa, +1);

    std::vector<double> out(out_len);
    for (std::size_t i = 0; i < out_len; ++i) out[i] = fa[i].real();
    return out;
}

std::vector<double> fft_correlate(const std::vector<double>& a,
                                  const std::vector<double>& f) {
    if (a.empty() || f.empty()) return {};
    // c[i] = sum_j a[j] f[i+j] is a convolution of reversed(a) with f
    // shifted by a.size()-1.
    std::vector<double> ar(a.rbegin(), a.rend());
    std::vector<double> full = fft_convolve(ar, f);
    std::vector<double> out(f.size());
    const std::size_t off = a.size() - 1;
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = full[off + i];
    return out;
}

} // namespace drflow::detail
