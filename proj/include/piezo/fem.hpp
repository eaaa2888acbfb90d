#ifndef PIEZO_FEM_HPP
#define PIEZO_FEM_HPP

#include "piezo/material.hpp"
#include "piezo/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

namespace piezo {

using SpMat = Eigen::SparseMatrix<double>;

// Nodal Lagrange basis of order k on the reference triangle, constructed
// from the monomial basis by inverting the node Vandermonde matrix.
class LagrangeBasis {
public:
    explicit LagrangeBasis(int order);
    int order;
    int ndofs;
    std::vector<Eigen::Vector2d> nodes;               // reference lattice points
    std::vector<std::array<int, 3>> node_bary;        // integer barycentric (k-i-j, i, j)
    void eval(const Eigen::Vector2d& p, double* values) const;
    void grad(const Eigen::Vector2d& p, Eigen::Vector2d* grads) const;

private:
    Eigen::MatrixXd coeff_; // monomial coefficients per basis function
    std::vector<std::array<int, 2>> monos_;
};

// Scalar Lagrange space V_h of order k on the mesh plus the derived vector
// space V_h^2 (dof i -> x component, i + n_scalar -> y component).
struct FemSpaces {
    int order = 1;
    int n_scalar = 0;
    std::vector<std::vector<int>> element_dofs; // per triangle, lattice order
    std::vector<Eigen::Vector2d> dof_points;
    std::vector<std::vector<int>> panel_dofs;   // per panel, ordered v0 -> v1
    std::vector<uint8_t> on_dirichlet;          // per scalar dof
    std::vector<int> dirichlet_dofs;            // sorted
    std::vector<int> free_dofs;                 // sorted complement
    std::vector<int> free_index;                // scalar dof -> index in free_dofs or -1

    int n_vector() const { return 2 * n_scalar; }
    int n_free() const { return static_cast<int>(free_dofs.size()); }
};

FemSpaces build_spaces(const TriMesh& mesh, int order);

struct FemBlocks {
    SpMat M_rho;     // vector mass weighted by rho   (2Ns x 2Ns)
    SpMat M_omega;   // vector mass weighted by omega (2Ns x 2Ns)
    SpMat K_C;       // elastic stiffness             (2Ns x 2Ns)
    SpMat K_e;       // piezo coupling                (2Ns x Ns)
    SpMat K_kappa;   // dielectric stiffness          (Ns x Ns)
    SpMat M_scalar;  // unweighted scalar mass        (for norms)
    SpMat K_scalar;  // unweighted scalar stiffness   (for norms)
};

FemBlocks assemble_blocks(const TriMesh& mesh, const FemSpaces& spaces,
                          const PiezoMaterial& material);

// Discrete electric solve: psi in V_h with gamma_D psi = mu and
// (kappa grad psi, grad phi) = (eps(u), e grad phi) - <eta, phi>_GammaN
// for all phi in V_{h,D}. `eta_load` is the preassembled Neumann load
// vector (may be empty for zero eta).
Eigen::VectorXd solve_electric(const FemBlocks& blocks, const FemSpaces& spaces,
                               const Eigen::VectorXd& u_dofs,
                               const Eigen::VectorXd& eta_load,
                               const Eigen::VectorXd& mu_dirichlet_values);

// Interpolants of (1,0), (0,1), (-y,x) as vector dof arrays.
std::array<Eigen::VectorXd, 3> rigid_motion_basis(const FemSpaces& spaces);

// Triplet text dump for debugging.
void dump_coo(const SpMat& m, const std::string& path);

} // namespace piezo

#endif
