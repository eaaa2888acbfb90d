#ifndef PIEZO_MATERIAL_HPP
#define PIEZO_MATERIAL_HPP

#include "piezo/expr.hpp"

#include <Eigen/Dense>
#include <span>
#include <string>

namespace piezo {

struct MaterialDiagnostics {
    double c_eig_min = 0, c_eig_max = 0;
    double kappa_eig_min = 0, kappa_eig_max = 0;
    double rho_min = 0, rho_max = 0;
    double omega_min = 0, omega_max = 0;
};

// Physical coefficients of the solid and the surrounding fluid, in Voigt
// form. Strain vectors use engineering shear (e11, e22, 2*e12) so that
// energy pairings are plain dot products; stress vectors are (s11, s22, s12).
class PiezoMaterial {
public:
    Eigen::Matrix3d c_voigt = Eigen::Matrix3d::Identity();   // stiffness
    Eigen::Matrix<double, 2, 3> e_voigt =
        Eigen::Matrix<double, 2, 3>::Zero();                  // piezoelectric
    Eigen::Matrix2d kappa_psi = Eigen::Matrix2d::Identity();  // dielectric
    Expr rho;       // solid density rho(x,y) >= rho0 > 0
    Expr omega;     // damping omega(x,y) >= 0
    double kappa0 = 1.0;  // 1/rho_fluid
    double kappa1 = 1.0;  // 1/(c^2 rho_fluid)

    PiezoMaterial();

    // kappa_psi from the Voigt vector (k11, k22, k12).
    void set_kappa_voigt(double k11, double k22, double k12);

    double c_sound() const { return std::sqrt(kappa0 / kappa1); }
    bool piezo_active() const { return e_voigt.cwiseAbs().maxCoeff() > 0.0; }

    // sigma_V = C eps_V + e^T grad_psi
    Eigen::Vector3d stress_voigt(const Eigen::Vector3d& eps_voigt,
                                 const Eigen::Vector2d& grad_psi) const {
        return c_voigt * eps_voigt + e_voigt.transpose() * grad_psi;
    }
    // d = e eps_V - kappa_psi grad_psi
    Eigen::Vector2d electric_displacement(const Eigen::Vector3d& eps_voigt,
                                          const Eigen::Vector2d& grad_psi) const {
        return e_voigt * eps_voigt - kappa_psi * grad_psi;
    }
    Eigen::Matrix3d compliance() const { return c_voigt.inverse(); }
};

// Eigenvalue bounds of the tensors and min/max of rho, omega over the
// sample points; throws NumericalError on a violated coefficient assumption.
MaterialDiagnostics validate_material(const PiezoMaterial& m,
                                      std::span<const Eigen::Vector2d> sample_points);

} // namespace piezo

#endif
