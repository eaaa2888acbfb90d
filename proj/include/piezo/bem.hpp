#ifndef PIEZO_BEM_HPP
#define PIEZO_BEM_HPP

#include "piezo/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <complex>
#include <span>
#include <vector>

namespace piezo {

using Complexd = std::complex<double>;

// Fundamental solution of Delta U - s^2 U = 0 in the plane: K0(s r)/(2 pi).
Complexd helmholtz_kernel(Complexd s, double r);

// Galerkin boundary element pair on the panel curve:
//   Y_h: continuous piecewise P_p   (Dirichlet-type densities, phi)
//   X_h: discontinuous piecewise P_{p-1} (Neumann-type densities, lambda)
// X basis functions are shifted Legendre polynomials per panel, Y basis
// functions are Lagrange nodal polynomials with endpoints shared per loop.
struct BoundarySpaces {
    int order = 1; // p
    int n_panels = 0;
    int dim_x = 0;
    int dim_y = 0;
    std::vector<std::vector<int>> panel_x_dofs; // p per panel
    std::vector<std::vector<int>> panel_y_dofs; // p+1 per panel, shared endpoints
    Eigen::SparseMatrix<double> M_XY; // <chi_i, zeta_j>, dim_x x dim_y
    Eigen::SparseMatrix<double> M_X;  // X mass (block diagonal)
    Eigen::SparseMatrix<double> M_Y;  // Y mass
    std::vector<Eigen::Vector2d> y_dof_points;
};

BoundarySpaces build_boundary_spaces(const BoundaryCurve& boundary, int order);

// panel-local basis evaluation (t in [0,1] along the panel)
void x_basis_values(int order, double t, double* vals);  // order values
void y_basis_values(int order, double t, double* vals);  // order+1 values
void y_basis_derivs(int order, double t, double* vals);  // d/dt

struct LayerOperators {
    Complexd s;
    Eigen::MatrixXcd V;  // dim_x x dim_x
    Eigen::MatrixXcd K;  // dim_x x dim_y
    Eigen::MatrixXcd Kt; // dim_y x dim_x
    Eigen::MatrixXcd W;  // dim_y x dim_y
    bool refinement_capped = false;
};

LayerOperators assemble_operators(const BoundaryCurve& boundary, const BoundarySpaces& spaces,
                                  Complexd s);

// S(s) lambda - D(s) phi at points off the boundary.
Eigen::VectorXcd eval_potentials(const BoundaryCurve& boundary, const BoundarySpaces& spaces,
                                 Complexd s, const Eigen::VectorXcd& lambda,
                                 const Eigen::VectorXcd& phi,
                                 std::span<const Eigen::Vector2d> points);

// Fixed Gauss nodes on every panel; used for boundary data sampling and the
// trace-coupling loads.
struct PanelQuadrature {
    int per_panel = 0;
    std::vector<Eigen::Vector2d> points;
    std::vector<double> weights; // scaled by panel length
    std::vector<Eigen::Vector2d> normals;
    std::vector<int> panel_of;
    std::vector<double> param;
    int size() const { return static_cast<int>(points.size()); }
};

PanelQuadrature make_panel_quadrature(const BoundaryCurve& boundary, int per_panel);

void dump_coo_complex(const Eigen::MatrixXcd& m, const std::string& path);

} // namespace piezo

#endif
