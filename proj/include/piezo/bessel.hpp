#ifndef PIEZO_BESSEL_HPP
#define PIEZO_BESSEL_HPP

#include <complex>
#include <vector>

namespace piezo {

using Complex = std::complex<double>;

// Modified Bessel functions for complex argument with Re z > 0.
// Power series for |z| <= 2, Steed/Lentz continued fraction for the middle
// range, asymptotic expansion for |z| >= 30.
struct BesselK01 {
    Complex k0, k1;
};
BesselK01 bessel_k01(Complex z);
Complex bessel_k0(Complex z);
Complex bessel_k1(Complex z);

// Exponentially scaled: returns K_n(z) * e^z so large Re z does not underflow.
BesselK01 bessel_k01_scaled(Complex z);

Complex bessel_i0(Complex z); // series, |z| <= ~20
Complex bessel_i1(Complex z);

// I_n(z) for n = 0..nmax by Miller backward recurrence, normalized through
// the Wronskian with K. Usable for moderate |z| (grows like e^|Re z|).
std::vector<Complex> bessel_i_seq(Complex z, int nmax);

// Scaled sequences for large |z| and large order, stored as mantissa*2^exp2.
struct ScaledSeq {
    std::vector<Complex> mant;
    std::vector<long> exp2;
    Complex value(int n) const { return std::ldexp(1.0, static_cast<int>(exp2[static_cast<size_t>(n)])) * mant[static_cast<size_t>(n)]; }
};
// K_n(z) * e^z for n = 0..nmax (forward recurrence, always stable).
ScaledSeq bessel_k_seq_scaled(Complex z, int nmax);
// I_n(z) * e^{-z} for n = 0..nmax (Miller + Wronskian normalization).
ScaledSeq bessel_i_seq_scaled(Complex z, int nmax);

// Splitting K_0(z) = smooth(z) - I_0(z) * ln r with z = s*r, used by the
// log-weighted singular quadrature: K0(s r) = A(r) + B(r) ln(r),
// A = -(ln(s/2)+gamma) I_0(sr) + sum_k H_k (sr/2)^(2k)/(k!)^2, B = -I_0(sr).
// Only valid while the series converges comfortably (|sr| <= ~8).
struct KernelSplit {
    Complex smooth;   // A(r)
    Complex log_coef; // B(r)
};
KernelSplit bessel_k0_split(Complex s, double r);
// Same for s*K_1(s r) = 1/r + A1(r) + B1(r) ln(r).
struct KernelSplitK1 {
    Complex smooth;
    Complex log_coef;
};
KernelSplitK1 bessel_k1s_split(Complex s, double r);

} // namespace piezo

#endif
