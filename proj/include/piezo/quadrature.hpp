#ifndef PIEZO_QUADRATURE_HPP
#define PIEZO_QUADRATURE_HPP

#include <Eigen/Dense>
#include <vector>

namespace piezo {

struct Rule1D {
    std::vector<double> points;  // in [0,1]
    std::vector<double> weights;
    int size() const { return static_cast<int>(points.size()); }
};

// n-point Gauss-Legendre on [0,1] (exact to degree 2n-1).
const Rule1D& gauss_legendre(int n);

// n-point Gauss rule for the weight -ln(t) on [0,1]:
// int_0^1 f(t) (-ln t) dt = sum w_i f(t_i), exact for f of degree 2n-1.
const Rule1D& gauss_log(int n);

struct TriangleRule {
    std::vector<Eigen::Vector2d> points; // on the reference triangle (0,0),(1,0),(0,1)
    std::vector<double> weights;         // sum to 1/2
    int size() const { return static_cast<int>(points.size()); }
};

// Conical-product rule exact for total degree `degree`.
const TriangleRule& triangle_rule(int degree);

} // namespace piezo

#endif
