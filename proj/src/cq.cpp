#include "piezo/cq.hpp"
#include "piezo/dft.hpp"
#include "piezo/errors.hpp"

#include <algorithm>
#include <cmath>

namespace piezo {

using Cd = std::complex<double>;

CqScheme CqScheme::create(double dt, int nsteps, double tol) {
    if (dt <= 0.0) throw ConfigError("CQ timestep must be positive");
    if (nsteps < 0) throw ConfigError("CQ step count must be nonnegative");
    if (!(tol > 0.0 && tol < 1.0)) throw ConfigError("CQ contour tolerance must be in (0,1)");
    CqScheme s;
    s.dt = dt;
    s.nsteps = nsteps;
    s.radius = std::pow(tol, 1.0 / (2.0 * (nsteps + 1)));

    // invariants: all frequencies in the right half plane and distinct
    auto freqs = s.frequencies();
    double min_re = freqs[0].real();
    for (const Cd& f : freqs) min_re = std::min(min_re, f.real());
    if (!(min_re > 0.0))
        throw NumericalError("CQ contour produced a frequency with Re s <= 0");
    std::vector<Cd> sorted = freqs;
    std::sort(sorted.begin(), sorted.end(), [](const Cd& a, const Cd& b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    for (size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i] == sorted[i - 1]) throw NumericalError("CQ frequencies collide");
    return s;
}

Cd CqScheme::zeta(int l) const {
    double ang = -2.0 * M_PI * double(l) / double(n_times());
    return Cd(std::cos(ang), std::sin(ang));
}

std::vector<Cd> CqScheme::frequencies() const {
    std::vector<Cd> f(static_cast<size_t>(n_times()));
    for (int l = 0; l < n_times(); ++l) f[static_cast<size_t>(l)] = frequency(l);
    return f;
}

std::vector<double> CqScheme::times() const {
    std::vector<double> t(static_cast<size_t>(n_times()));
    for (int n = 0; n < n_times(); ++n) t[static_cast<size_t>(n)] = time(n);
    return t;
}

std::vector<Cd> CqScheme::forward(const std::vector<double>& samples) const {
    std::vector<Cd> buf(samples.begin(), samples.end());
    return forward(buf);
}

std::vector<Cd> CqScheme::forward(const std::vector<Cd>& samples) const {
    if (static_cast<int>(samples.size()) != n_times())
        throw ConfigError("CQ transform length mismatch");
    std::vector<Cd> buf(samples);
    double scale = 1.0;
    for (int n = 0; n < n_times(); ++n) {
        buf[static_cast<size_t>(n)] *= scale;
        scale *= radius;
    }
    dft(buf, false);
    return buf;
}

std::vector<Cd> CqScheme::inverse(const std::vector<Cd>& spectrum) const {
    if (static_cast<int>(spectrum.size()) != n_times())
        throw ConfigError("CQ transform length mismatch");
    std::vector<Cd> buf(spectrum);
    dft(buf, true);
    double scale = 1.0;
    for (int n = 0; n < n_times(); ++n) {
        buf[static_cast<size_t>(n)] /= scale;
        scale *= radius;
    }
    return buf;
}

std::vector<Cd> CqScheme::mirror_half(const std::vector<Cd>& half) const {
    if (static_cast<int>(half.size()) != n_half())
        throw ConfigError("CQ half-spectrum length mismatch");
    std::vector<Cd> full(static_cast<size_t>(n_times()));
    for (int l = 0; l < n_half(); ++l) full[static_cast<size_t>(l)] = half[static_cast<size_t>(l)];
    for (int l = n_half(); l < n_times(); ++l)
        full[static_cast<size_t>(l)] = std::conj(full[static_cast<size_t>(n_times() - l)]);
    return full;
}

std::vector<double> CqScheme::inverse_real_from_half(const std::vector<Cd>& half) const {
    std::vector<Cd> full = mirror_half(half);
    std::vector<Cd> t = inverse(full);
    std::vector<double> out(t.size());
    for (size_t i = 0; i < t.size(); ++i) out[i] = t[i].real();
    return out;
}

std::vector<double> convolve_transfer(const std::function<Cd(Cd)>& F,
                                      const std::vector<double>& g, const CqScheme& scheme) {
    std::vector<Cd> spec = scheme.forward(g);
    for (int l = 0; l < scheme.n_times(); ++l)
        spec[static_cast<size_t>(l)] *= F(scheme.frequency(l));
    std::vector<Cd> back = scheme.inverse(spec);
    std::vector<double> out(back.size());
    for (size_t i = 0; i < back.size(); ++i) out[i] = back[i].real();
    return out;
}

} // namespace piezo
