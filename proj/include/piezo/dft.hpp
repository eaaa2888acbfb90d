#ifndef PIEZO_DFT_HPP
#define PIEZO_DFT_HPP

#include <complex>
#include <vector>

namespace piezo {

// In-place DFT of arbitrary length: radix-2 when the size is a power of two,
// Bluestein otherwise. forward: X_k = sum_n x_n e^{-2 pi i nk/N};
// inverse includes the 1/N factor.
void dft(std::vector<std::complex<double>>& data, bool inverse);

} // namespace piezo

#endif
