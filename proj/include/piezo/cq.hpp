#ifndef PIEZO_CQ_HPP
#define PIEZO_CQ_HPP

#include <complex>
#include <functional>
#include <vector>

namespace piezo {

// BDF2-based Convolution Quadrature, all-steps-at-once realization: a
// scaled DFT turns the discrete convolution into decoupled frequency
// problems at s_l = delta(lambda * zeta_l) / dt on the contour |zeta| = 1.
class CqScheme {
public:
    double dt = 0.0;
    int nsteps = 0;     // time grid t_0..t_N with N = nsteps
    double radius = 0.0; // contour radius lambda in (0,1)

    static std::complex<double> bdf2_symbol(std::complex<double> zeta) {
        return 1.5 - 2.0 * zeta + 0.5 * zeta * zeta;
    }

    // radius = tol^(1/(2(N+1))), the standard accuracy/conditioning balance.
    static CqScheme create(double dt, int nsteps, double tol = 1e-12);

    int n_times() const { return nsteps + 1; }
    // number of independent frequencies given conjugate pairing
    int n_half() const { return (nsteps + 3) / 2; }

    std::complex<double> zeta(int l) const;
    std::complex<double> frequency(int l) const { return bdf2_symbol(radius * zeta(l)) / dt; }
    std::vector<std::complex<double>> frequencies() const;

    double time(int n) const { return dt * n; }
    std::vector<double> times() const;

    // Forward: hat g_l = sum_n g_n lambda^n zeta_l^{-n}; inverse is exact.
    std::vector<std::complex<double>> forward(const std::vector<double>& samples) const;
    std::vector<std::complex<double>> forward(const std::vector<std::complex<double>>& samples) const;
    std::vector<std::complex<double>> inverse(const std::vector<std::complex<double>>& spectrum) const;
    // Real signal from the independent half of a conjugate-symmetric spectrum
    // (entries l = 0..n_half()-1).
    std::vector<double> inverse_real_from_half(const std::vector<std::complex<double>>& half) const;
    // Mirror a half spectrum to the full conjugate-symmetric one.
    std::vector<std::complex<double>> mirror_half(const std::vector<std::complex<double>>& half) const;
};

// CQ approximation of (F(d/dt) g)(t_n) for a scalar transfer function.
std::vector<double> convolve_transfer(const std::function<std::complex<double>(std::complex<double>)>& F,
                                      const std::vector<double>& g, const CqScheme& scheme);

} // namespace piezo

#endif
