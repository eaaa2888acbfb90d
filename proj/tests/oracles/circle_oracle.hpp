#ifndef ORACLE_CIRCLE_HPP
#define ORACLE_CIRCLE_HPP

// Separated-variables reference solutions on a circle, built on the scaled
// modified-Bessel sequences. Independent of the Galerkin assembly path:
// only the kernel's Bessel routines are shared, and those are themselves
// cross-checked against an independent oracle.

#include "piezo/bessel.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <vector>

namespace oracle {

using Cd = std::complex<double>;

// mantissa * 2^e arithmetic so ratios of huge/tiny Bessel values stay finite
struct Sc {
    Cd m;
    long e;
};
inline Sc sc_norm(Sc a) {
    double mag = std::abs(a.m);
    if (mag == 0.0) return {0.0, 0};
    int ex;
    std::frexp(mag, &ex);
    if (ex > 200 || ex < -200) {
        a.m = Cd(std::ldexp(a.m.real(), -ex), std::ldexp(a.m.imag(), -ex));
        a.e += ex;
    }
    return a;
}
inline Sc sc_of(const piezo::ScaledSeq& s, int n) {
    return {s.mant[static_cast<size_t>(n)], s.exp2[static_cast<size_t>(n)]};
}
inline Sc sc_mul(Sc a, Sc b) { return sc_norm({a.m * b.m, a.e + b.e}); }
inline Sc sc_div(Sc a, Sc b) { return sc_norm({a.m / b.m, a.e - b.e}); }
inline Sc sc_add(Sc a, Sc b) {
    if (std::abs(a.m) == 0.0) return b;
    if (std::abs(b.m) == 0.0) return a;
    long sh = b.e - a.e;
    if (sh > 100) return b;
    if (sh < -100) return a;
    return sc_norm({a.m + Cd(std::ldexp(b.m.real(), static_cast<int>(sh)),
                             std::ldexp(b.m.imag(), static_cast<int>(sh))),
                    a.e});
}
inline Cd sc_val(Sc a) {
    if (std::abs(a.m) == 0.0) return 0.0;
    if (a.e > 1000) return Cd(1e300, 1e300);
    if (a.e < -1000) return 0.0;
    return Cd(std::ldexp(a.m.real(), static_cast<int>(a.e)),
              std::ldexp(a.m.imag(), static_cast<int>(a.e)));
}

// I_n(s R) K_n(s R) for n = 0..nmax: the single-layer symbol on the circle
// of radius R.
inline std::vector<Cd> single_layer_symbol(Cd s, double R, int nmax) {
    auto ks = piezo::bessel_k_seq_scaled(s * R, nmax);
    auto is = piezo::bessel_i_seq_scaled(s * R, nmax);
    std::vector<Cd> out(static_cast<size_t>(nmax + 1));
    for (int n = 0; n <= nmax; ++n)
        out[static_cast<size_t>(n)] = sc_val(sc_mul(sc_of(is, n), sc_of(ks, n)));
    return out;
}

// -s^2 I_n'(s R) K_n'(s R): the hypersingular symbol on the circle.
inline std::vector<Cd> hypersingular_symbol(Cd s, double R, int nmax) {
    auto ks = piezo::bessel_k_seq_scaled(s * R, nmax + 1);
    auto is = piezo::bessel_i_seq_scaled(s * R, nmax + 1);
    std::vector<Cd> out(static_cast<size_t>(nmax + 1));
    for (int n = 0; n <= nmax; ++n) {
        Sc idn = (n == 0) ? sc_of(is, 1)
                          : sc_mul({0.5, 0}, sc_add(sc_of(is, n - 1), sc_of(is, n + 1)));
        Sc kdn = (n == 0) ? Sc{-ks.mant[1], ks.exp2[1]}
                          : sc_mul({-0.5, 0}, sc_add(sc_of(ks, n - 1), sc_of(ks, n + 1)));
        out[static_cast<size_t>(n)] = -s * s * sc_val(sc_mul(idn, kdn));
    }
    return out;
}

// Exterior scattered field of the rigid circle of radius R under the
// incident plane wave v(x) = ghat * exp(-s (x.dir)/c) (unit sound speed):
// exterior Neumann data du/dr = -dv/dr on r = R, evaluated at (r, theta).
inline Cd rigid_circle_scattered(Cd s, double R, Cd ghat, const std::array<double, 2>& dir,
                                 double r, double theta) {
    if (std::abs(ghat) == 0.0) return 0.0;
    double theta_inc = std::atan2(dir[1], dir[0]);
    int nmax = static_cast<int>(std::abs(s) * std::max(R, 1.0) * 1.4 + 50);
    auto isR = piezo::bessel_i_seq_scaled(s * R, nmax + 1);
    auto ksR = piezo::bessel_k_seq_scaled(s * R, nmax + 1);
    auto ksr = piezo::bessel_k_seq_scaled(s * r, nmax);
    Cd rad = std::exp(-s * (r - R)); // carried by the scaled K ratio
    Cd total = 0.0;
    double delta = theta - theta_inc;
    for (int m = 0; m < nmax; ++m) {
        Sc idm = (m == 0) ? sc_of(isR, 1)
                          : sc_mul({0.5, 0}, sc_add(sc_of(isR, m - 1), sc_of(isR, m + 1)));
        Sc kdm = (m == 0) ? Sc{-ksR.mant[1], ksR.exp2[1]}
                          : sc_mul({-0.5, 0}, sc_add(sc_of(ksR, m - 1), sc_of(ksR, m + 1)));
        double sgn = (m % 2 == 0) ? 1.0 : -1.0;
        // a_m s K_m'(sR) = -ghat sgn s I_m'(sR)
        Sc am_ratio = sc_mul(sc_div(idm, kdm), sc_div(sc_of(ksr, m), sc_of(ksR, m)));
        Cd term = -ghat * sgn * sc_val(am_ratio) * rad;
        Cd ang = (m == 0) ? Cd(1.0) : 2.0 * std::cos(m * delta);
        Cd contrib = term * ang;
        total += contrib;
        if (m > std::abs(s) * R + 8 && std::abs(contrib) < 1e-16 * (std::abs(total) + 1e-300))
            break;
    }
    return total;
}

} // namespace oracle

#endif
