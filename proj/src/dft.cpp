#include "piezo/dft.hpp"

#include <cmath>
#include <cstdint>

namespace piezo {

namespace {

using Cd = std::complex<double>;

bool is_pow2(size_t n) { return n && (n & (n - 1)) == 0; }

void fft_pow2(std::vector<Cd>& a, bool inverse) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * M_PI / double(len) * (inverse ? 1.0 : -1.0);
        Cd wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            Cd w(1.0);
            for (size_t j = 0; j < len / 2; ++j) {
                Cd u = a[i + j];
                Cd v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (Cd& x : a) x /= double(n);
}

// Bluestein: x_k chirped, convolved with the conjugate chirp via a padded
// power-of-two FFT. Chirp angles reduced mod 2N in integers to keep the
// trig arguments accurate for large n.
void bluestein(std::vector<Cd>& a, bool inverse) {
    const size_t n = a.size();
    const double sign = inverse ? 1.0 : -1.0;
    size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;
    std::vector<Cd> chirp(n);
    for (size_t k = 0; k < n; ++k) {
        uint64_t k2 = (static_cast<uint64_t>(k) * k) % (2 * n);
        double ang = sign * M_PI * double(k2) / double(n);
        chirp[k] = Cd(std::cos(ang), std::sin(ang));
    }
    std::vector<Cd> f(m, Cd(0.0)), g(m, Cd(0.0));
    for (size_t k = 0; k < n; ++k) f[k] = a[k] * chirp[k];
    g[0] = std::conj(chirp[0]);
    for (size_t k = 1; k < n; ++k) g[k] = g[m - k] = std::conj(chirp[k]);
    fft_pow2(f, false);
    fft_pow2(g, false);
    for (size_t k = 0; k < m; ++k) f[k] *= g[k];
    fft_pow2(f, true);
    for (size_t k = 0; k < n; ++k) a[k] = f[k] * chirp[k];
    if (inverse)
        for (Cd& x : a) x /= double(n);
}

} // namespace

void dft(std::vector<Cd>& data, bool inverse) {
    if (data.size() <= 1) return;
    if (is_pow2(data.size()))
        fft_pow2(data, inverse);
    else
        bluestein(data, inverse);
}

} // namespace piezo
