#include "piezo/bessel.hpp"
#include "piezo/errors.hpp"

#include <cmath>
#include <limits>

namespace piezo {

namespace {

constexpr double kEulerGamma = 0.57721566490153286060651209008240243;
constexpr double kEps = std::numeric_limits<double>::epsilon();

struct SeriesI01 {
    Complex i0, i1;
};

SeriesI01 series_i01(Complex z) {
    const Complex q = 0.25 * z * z;
    Complex t0 = 1.0, t1 = 1.0;
    Complex s0 = t0, s1 = t1;
    for (int k = 1; k < 80; ++k) {
        t0 *= q / (double(k) * k);
        t1 *= q / (double(k) * (k + 1.0));
        s0 += t0;
        s1 += t1;
        if (std::abs(t0) < kEps * std::abs(s0) && std::abs(t1) < kEps * std::abs(s1)) break;
    }
    return {s0, 0.5 * z * s1};
}

// K0, K1 by the defining log series; adequate for |z| <= 2.
BesselK01 series_k01(Complex z) {
    const Complex q = 0.25 * z * z;
    const Complex lg = std::log(0.5 * z);
    SeriesI01 i01 = series_i01(z);

    // K0 = -(log(z/2)+gamma) I0 + sum_{k>=1} H_k q^k/(k!)^2
    Complex term = 1.0, sum0 = 0.0;
    double hk = 0.0;
    for (int k = 1; k < 80; ++k) {
        term *= q / (double(k) * k);
        hk += 1.0 / k;
        Complex add = term * hk;
        sum0 += add;
        if (std::abs(add) < kEps * (std::abs(sum0) + 1e-300)) break;
    }
    Complex k0 = -(lg + kEulerGamma) * i01.i0 + sum0;

    // K1 = 1/z + log(z/2) I1 - z/4 sum_{k>=0} (psi(k+1)+psi(k+2)) q^k/(k!(k+1)!)
    Complex t = 1.0, sum1 = 0.0;
    double psi1 = -kEulerGamma, psi2 = 1.0 - kEulerGamma;
    for (int k = 0; k < 80; ++k) {
        if (k > 0) {
            t *= q / (double(k) * (k + 1.0));
            psi1 += 1.0 / k;
            psi2 += 1.0 / (k + 1.0);
        }
        Complex add = t * (psi1 + psi2);
        sum1 += add;
        if (k > 2 && std::abs(add) < kEps * (std::abs(sum1) + 1e-300)) break;
    }
    Complex k1 = 1.0 / z + lg * i01.i1 - 0.25 * z * sum1;
    return {k0, k1};
}

// Thompson-Barnett CF2 evaluated with the Temme normalization sum; valid
// for Re z > 0, converges fastest for |z| >~ 2. Returns K0*e^z and K1*e^z.
BesselK01 cf2_k01_scaled(Complex z) {
    const double a1 = 0.25; // 1/4 - nu^2 at nu = 0
    Complex b = 2.0 * (1.0 + z);
    Complex d = 1.0 / b;
    Complex delh = d, h = d;
    Complex q1 = 0.0, q2 = 1.0;
    Complex q = a1, c = a1, a = -a1;
    Complex s = 1.0 + q * delh;
    bool converged = false;
    for (int i = 2; i <= 20000; ++i) {
        a -= 2.0 * (i - 1);
        c = -a * c / double(i);
        Complex qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        Complex dels = q * delh;
        s += dels;
        if (std::abs(dels) < kEps * std::abs(s)) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NumericalError("bessel_k: continued fraction failed to converge");
    h = a1 * h;
    Complex k0 = std::sqrt(M_PI / (2.0 * z)) / s;
    Complex k1 = k0 * (z + 0.5 - h) / z;
    return {k0, k1};
}

// Asymptotic expansion, scaled by e^z; |z| >= 30 keeps the truncation error
// below 1e-14 relative.
BesselK01 asymptotic_k01_scaled(Complex z) {
    const Complex iz = 1.0 / (8.0 * z);
    Complex t0 = 1.0, t1 = 1.0;
    Complex s0 = 1.0, s1 = 1.0;
    for (int k = 1; k <= 40; ++k) {
        double m = 2.0 * k - 1.0;
        t0 *= -(m * m) * iz / double(k);
        t1 *= (4.0 - m * m) * iz / double(k);
        s0 += t0;
        s1 += t1;
        if (std::abs(t0) < kEps && std::abs(t1) < kEps) break;
    }
    Complex pref = std::sqrt(M_PI / (2.0 * z));
    return {pref * s0, pref * s1};
}

} // namespace

BesselK01 bessel_k01_scaled(Complex z) {
    if (!(z.real() > 0.0)) throw NumericalError("bessel_k: Re z must be positive");
    double az = std::abs(z);
    if (az <= 2.0) {
        BesselK01 r = series_k01(z);
        Complex e = std::exp(z);
        return {r.k0 * e, r.k1 * e};
    }
    if (az < 30.0) return cf2_k01_scaled(z);
    return asymptotic_k01_scaled(z);
}

BesselK01 bessel_k01(Complex z) {
    BesselK01 r = bessel_k01_scaled(z);
    Complex e = std::exp(-z);
    return {r.k0 * e, r.k1 * e};
}

Complex bessel_k0(Complex z) { return bessel_k01(z).k0; }
Complex bessel_k1(Complex z) { return bessel_k01(z).k1; }

Complex bessel_i0(Complex z) { return series_i01(z).i0; }
Complex bessel_i1(Complex z) { return series_i01(z).i1; }

KernelSplit bessel_k0_split(Complex s, double r) {
    Complex z = s * r;
    const Complex q = 0.25 * z * z;
    Complex i0 = 1.0, term = 1.0, sum = 0.0;
    double hk = 0.0;
    for (int k = 1; k < 60; ++k) {
        term *= q / (double(k) * k);
        hk += 1.0 / k;
        i0 += term;
        sum += term * hk;
        if (std::abs(term) * (hk + 1.0) < kEps * (std::abs(i0) + std::abs(sum))) break;
    }
    Complex smooth = -(std::log(0.5 * s) + kEulerGamma) * i0 + sum;
    return {smooth, -i0};
}

KernelSplitK1 bessel_k1s_split(Complex s, double r) {
    // s*K1(s r) = 1/r + s*log(r) I1(sr) + s*[log(s/2) I1(sr) - (sr/4) S(sr)]
    Complex z = s * r;
    const Complex q = 0.25 * z * z;
    Complex i1term = 1.0, i1sum = 1.0;
    Complex t = 1.0, sum1 = 0.0;
    double psi1 = -kEulerGamma, psi2 = 1.0 - kEulerGamma;
    for (int k = 0; k < 60; ++k) {
        if (k > 0) {
            i1term *= q / (double(k) * (k + 1.0));
            i1sum += i1term;
            t *= q / (double(k) * (k + 1.0));
            psi1 += 1.0 / k;
            psi2 += 1.0 / (k + 1.0);
        }
        Complex add = t * (psi1 + psi2);
        sum1 += add;
        if (k > 2 && std::abs(add) < kEps * (std::abs(sum1) + 1.0)) break;
    }
    Complex i1 = 0.5 * z * i1sum;
    Complex smooth = s * (std::log(0.5 * s) * i1 - 0.25 * z * sum1);
    return {smooth, s * i1};
}

std::vector<Complex> bessel_i_seq(Complex z, int nmax) {
    ScaledSeq s = bessel_i_seq_scaled(z, nmax);
    Complex e = std::exp(z);
    std::vector<Complex> out(static_cast<size_t>(nmax + 1));
    for (int n = 0; n <= nmax; ++n) out[static_cast<size_t>(n)] = s.value(n) * e;
    return out;
}

namespace {

void renormalize(Complex& m, long& e) {
    double a = std::abs(m);
    if (a == 0.0) return;
    int ex = 0;
    std::frexp(a, &ex);
    if (ex > 256 || ex < -256) {
        m = Complex(std::ldexp(m.real(), -ex), std::ldexp(m.imag(), -ex));
        e += ex;
    }
}

} // namespace

ScaledSeq bessel_k_seq_scaled(Complex z, int nmax) {
    ScaledSeq out;
    out.mant.resize(static_cast<size_t>(nmax + 1));
    out.exp2.assign(static_cast<size_t>(nmax + 1), 0);
    BesselK01 k01 = bessel_k01_scaled(z);
    Complex km = k01.k0, kc = k01.k1;
    long em = 0, ec = 0;
    out.mant[0] = km;
    if (nmax >= 1) {
        out.mant[1] = kc;
    }
    for (int n = 1; n < nmax; ++n) {
        // K_{n+1} = K_{n-1} + (2n/z) K_n, tracked with separate exponents
        long shift = em - ec;
        Complex next = Complex(std::ldexp(km.real(), static_cast<int>(shift)),
                               std::ldexp(km.imag(), static_cast<int>(shift))) +
                       (2.0 * n / z) * kc;
        long en = ec;
        km = kc;
        em = ec;
        kc = next;
        ec = en;
        renormalize(kc, ec);
        out.mant[static_cast<size_t>(n + 1)] = kc;
        out.exp2[static_cast<size_t>(n + 1)] = ec;
    }
    return out;
}

ScaledSeq bessel_i_seq_scaled(Complex z, int nmax) {
    // Miller backward recurrence for ratios, absolute scale from the
    // Wronskian I_n K_{n+1} + I_{n+1} K_n = 1/z (holds for the e^{+-z}
    // scaled pair as well).
    const int nkeep = nmax;
    nmax = std::max(nmax, 1);
    ScaledSeq kseq = bessel_k_seq_scaled(z, nmax + 1);
    int ntop = nmax + 16 + static_cast<int>(2.0 * std::sqrt(double(std::max(nmax, 1))) +
                                            1.2 * std::sqrt(std::abs(z)));
    ScaledSeq out;
    out.mant.resize(static_cast<size_t>(nmax + 1));
    out.exp2.assign(static_cast<size_t>(nmax + 1), 0);

    Complex ip = 0.0, ic = 1e-280; // unnormalized
    long ep = 0, ec = 0;
    for (int n = ntop; n > 0; --n) {
        long shift = ep - ec;
        Complex prev = Complex(std::ldexp(ip.real(), static_cast<int>(shift)),
                               std::ldexp(ip.imag(), static_cast<int>(shift))) +
                       (2.0 * n / z) * ic;
        ip = ic;
        ep = ec;
        ic = prev;
        renormalize(ic, ec);
        if (n - 1 <= nmax) {
            out.mant[static_cast<size_t>(n - 1)] = ic;
            out.exp2[static_cast<size_t>(n - 1)] = ec;
            if (n <= nmax) {
                out.mant[static_cast<size_t>(n)] = ip;
                out.exp2[static_cast<size_t>(n)] = ep;
            }
        }
    }
    // scale c with I~_0 K^_1 + I~_1 K^_0 = 1/z
    Complex i0 = out.mant[0], i1 = out.mant[1];
    long e0 = out.exp2[0], e1 = out.exp2[1];
    Complex w = Complex(std::ldexp(i0.real(), static_cast<int>(e0 - e1)),
                        std::ldexp(i0.imag(), static_cast<int>(e0 - e1))) *
                    kseq.value(1) +
                i1 * kseq.value(0);
    // w * 2^{e1} should equal 1/z / c  =>  c = 1/(z * w * 2^{e1})
    Complex cm = 1.0 / (z * w);
    long ce = -e1;
    renormalize(cm, ce);
    for (int n = 0; n <= nmax; ++n) {
        out.mant[static_cast<size_t>(n)] *= cm;
        out.exp2[static_cast<size_t>(n)] += ce;
        renormalize(out.mant[static_cast<size_t>(n)], out.exp2[static_cast<size_t>(n)]);
    }
    out.mant.resize(static_cast<size_t>(nkeep + 1));
    out.exp2.resize(static_cast<size_t>(nkeep + 1));
    return out;
}

} // namespace piezo
