#include "piezo/quadrature.hpp"
#include "piezo/errors.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <mutex>

namespace piezo {

namespace {

// Golub-Welsch: nodes/weights from the Jacobi matrix of a weight with
// monic recurrence pi_{k+1} = (t - alpha_k) pi_k - beta_k pi_{k-1},
// beta_0 = total mass of the weight.
Rule1D golub_welsch(const std::vector<double>& alpha, const std::vector<double>& beta) {
    const int n = static_cast<int>(alpha.size());
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        J(i, i) = alpha[static_cast<size_t>(i)];
        if (i + 1 < n) {
            double b = std::sqrt(beta[static_cast<size_t>(i + 1)]);
            J(i, i + 1) = b;
            J(i + 1, i) = b;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    Rule1D r;
    r.points.resize(static_cast<size_t>(n));
    r.weights.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        r.points[static_cast<size_t>(i)] = es.eigenvalues()(i);
        double v0 = es.eigenvectors()(0, i);
        r.weights[static_cast<size_t>(i)] = beta[0] * v0 * v0;
    }
    return r;
}

Rule1D make_gauss_legendre(int n) {
    // Monic Legendre shifted to [0,1]: alpha_k = 1/2, beta_k = k^2/(4(4k^2-1)).
    std::vector<double> alpha(static_cast<size_t>(n), 0.5);
    std::vector<double> beta(static_cast<size_t>(n));
    beta[0] = 1.0;
    for (int k = 1; k < n; ++k)
        beta[static_cast<size_t>(k)] = double(k) * k / (4.0 * (4.0 * k * k - 1.0));
    return golub_welsch(alpha, beta);
}

// Gauss-Jacobi with weight (1-t) on [0,1], mass 1/2.
Rule1D make_gauss_jacobi10(int n) {
    // From Jacobi(alpha=1, beta=0) on [-1,1]:
    //   a_k = -1/((2k+1)(2k+3)),  b_k = k(k+1)/(2k+1)^2, mu0 = 2.
    // Shift x = 2t-1: alpha = (a+1)/2, beta = b/4, mass /4.
    std::vector<double> alpha(static_cast<size_t>(n));
    std::vector<double> beta(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        double a = -1.0 / ((2.0 * k + 1.0) * (2.0 * k + 3.0));
        alpha[static_cast<size_t>(k)] = (a + 1.0) / 2.0;
    }
    beta[0] = 0.5;
    for (int k = 1; k < n; ++k) {
        double b = double(k) * (k + 1.0) / ((2.0 * k + 1.0) * (2.0 * k + 1.0));
        beta[static_cast<size_t>(k)] = b / 4.0;
    }
    return golub_welsch(alpha, beta);
}

// Modified moments of -ln(t) against monic shifted Legendre, computed by
// composite Gauss on dyadic intervals toward t=0.
std::vector<double> log_weight_modified_moments(int count) {
    const Rule1D gl = make_gauss_legendre(24);
    std::vector<double> m(static_cast<size_t>(count), 0.0);
    std::vector<double> pi_vals(static_cast<size_t>(count));
    const int levels = 60;
    double hi = 1.0;
    for (int lev = 0; lev < levels; ++lev) {
        double lo = hi / 2.0;
        for (int q = 0; q < gl.size(); ++q) {
            double t = lo + (hi - lo) * gl.points[static_cast<size_t>(q)];
            double w = (hi - lo) * gl.weights[static_cast<size_t>(q)] * (-std::log(t));
            // monic shifted Legendre values at t
            double pm1 = 0.0, p0 = 1.0;
            for (int k = 0; k < count; ++k) {
                pi_vals[static_cast<size_t>(k)] = p0;
                double bk = (k == 0) ? 0.0 : double(k) * k / (4.0 * (4.0 * k * k - 1.0));
                double p1 = (t - 0.5) * p0 - bk * pm1;
                pm1 = p0;
                p0 = p1;
            }
            for (int k = 0; k < count; ++k) m[static_cast<size_t>(k)] += w * pi_vals[static_cast<size_t>(k)];
        }
        hi = lo;
    }
    return m;
}

// Modified Chebyshev algorithm: recurrence coefficients of the weight with
// the given modified moments relative to monic shifted Legendre.
Rule1D make_gauss_log(int n) {
    const int nm = 2 * n;
    std::vector<double> m = log_weight_modified_moments(nm);
    auto aux_a = [](int) { return 0.5; };
    auto aux_b = [](int l) {
        return l == 0 ? 0.0 : double(l) * l / (4.0 * (4.0 * l * l - 1.0));
    };
    std::vector<double> alpha(static_cast<size_t>(n)), beta(static_cast<size_t>(n));
    std::vector<std::vector<double>> sig(3, std::vector<double>(static_cast<size_t>(nm), 0.0));
    alpha[0] = aux_a(0) + m[1] / m[0];
    beta[0] = m[0];
    auto* prev2 = &sig[0];
    auto* prev = &sig[1];
    auto* cur = &sig[2];
    for (int l = 0; l < nm; ++l) (*prev)[static_cast<size_t>(l)] = m[static_cast<size_t>(l)];
    for (int k = 1; k < n; ++k) {
        for (int l = k; l < nm - k; ++l) {
            double s = (*prev)[static_cast<size_t>(l + 1)] -
                       (alpha[static_cast<size_t>(k - 1)] - aux_a(l)) * (*prev)[static_cast<size_t>(l)] -
                       ((k >= 2) ? beta[static_cast<size_t>(k - 1)] * (*prev2)[static_cast<size_t>(l)] : 0.0) +
                       aux_b(l) * (*prev)[static_cast<size_t>(l - 1)];
            (*cur)[static_cast<size_t>(l)] = s;
        }
        alpha[static_cast<size_t>(k)] = aux_a(k) +
                                        (*cur)[static_cast<size_t>(k + 1)] / (*cur)[static_cast<size_t>(k)] -
                                        (*prev)[static_cast<size_t>(k)] / (*prev)[static_cast<size_t>(k - 1)];
        beta[static_cast<size_t>(k)] = (*cur)[static_cast<size_t>(k)] / (*prev)[static_cast<size_t>(k - 1)];
        std::swap(prev2, prev);
        std::swap(prev, cur);
    }
    return golub_welsch(alpha, beta);
}

std::mutex cache_mutex;

} // namespace

const Rule1D& gauss_legendre(int n) {
    if (n < 1 || n > 64) throw NumericalError("gauss_legendre: order out of range");
    static std::map<int, Rule1D> cache;
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make_gauss_legendre(n)).first;
    return it->second;
}

const Rule1D& gauss_log(int n) {
    if (n < 1 || n > 16) throw NumericalError("gauss_log: order out of range");
    static std::map<int, Rule1D> cache;
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make_gauss_log(n)).first;
    return it->second;
}

const TriangleRule& triangle_rule(int degree) {
    if (degree < 1 || degree > 30) throw NumericalError("triangle_rule: degree out of range");
    static std::map<int, TriangleRule> cache;
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find(degree);
    if (it != cache.end()) return it->second;
    const int n = (degree + 2) / 2; // 2n-1 >= degree
    Rule1D jac = make_gauss_jacobi10(n);
    Rule1D leg = make_gauss_legendre(n);
    TriangleRule rule;
    for (int i = 0; i < n; ++i) {
        double xi = jac.points[static_cast<size_t>(i)];
        for (int j = 0; j < n; ++j) {
            double eta = leg.points[static_cast<size_t>(j)];
            rule.points.emplace_back(xi, eta * (1.0 - xi));
            rule.weights.push_back(jac.weights[static_cast<size_t>(i)] *
                                   leg.weights[static_cast<size_t>(j)]);
        }
    }
    return cache.emplace(degree, std::move(rule)).first->second;
}

} // namespace piezo
