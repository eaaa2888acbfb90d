#include "piezo/material.hpp"
#include "piezo/errors.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>

namespace piezo {

PiezoMaterial::PiezoMaterial() {
    rho = Expr::parse("1");
    omega = Expr::parse("0");
}

void PiezoMaterial::set_kappa_voigt(double k11, double k22, double k12) {
    kappa_psi << k11, k12, k12, k22;
}

MaterialDiagnostics validate_material(const PiezoMaterial& m,
                                      std::span<const Eigen::Vector2d> sample_points) {
    MaterialDiagnostics d;

    if ((m.c_voigt - m.c_voigt.transpose()).cwiseAbs().maxCoeff() > 1e-14 * m.c_voigt.norm())
        throw NumericalError("stiffness matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> ec(m.c_voigt);
    d.c_eig_min = ec.eigenvalues().minCoeff();
    d.c_eig_max = ec.eigenvalues().maxCoeff();
    if (d.c_eig_min <= 0.0)
        throw NumericalError("stiffness matrix is not positive definite (min eigenvalue " +
                             std::to_string(d.c_eig_min) + ")");

    if ((m.kappa_psi - m.kappa_psi.transpose()).cwiseAbs().maxCoeff() >
        1e-14 * m.kappa_psi.norm())
        throw NumericalError("dielectric matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> ek(m.kappa_psi);
    d.kappa_eig_min = ek.eigenvalues().minCoeff();
    d.kappa_eig_max = ek.eigenvalues().maxCoeff();
    if (d.kappa_eig_min <= 0.0)
        throw NumericalError("dielectric matrix is not positive definite (min eigenvalue " +
                             std::to_string(d.kappa_eig_min) + ")");

    if (m.kappa0 <= 0.0 || m.kappa1 <= 0.0)
        throw NumericalError("fluid constants kappa0, kappa1 must be positive");

    d.rho_min = std::numeric_limits<double>::infinity();
    d.rho_max = -d.rho_min;
    d.omega_min = d.rho_min;
    d.omega_max = -d.rho_min;
    for (const auto& p : sample_points) {
        double r = m.rho.eval(p.x(), p.y());
        double w = m.omega.eval(p.x(), p.y());
        d.rho_min = std::min(d.rho_min, r);
        d.rho_max = std::max(d.rho_max, r);
        d.omega_min = std::min(d.omega_min, w);
        d.omega_max = std::max(d.omega_max, w);
    }
    if (sample_points.empty()) {
        d.rho_min = d.rho_max = m.rho.eval(0, 0);
        d.omega_min = d.omega_max = m.omega.eval(0, 0);
    }
    if (!(d.rho_min > 0.0)) {
        std::ostringstream os;
        os << "solid density must be positive everywhere (min sampled value " << d.rho_min
           << ")";
        throw NumericalError(os.str());
    }
    if (d.omega_min < 0.0)
        throw NumericalError("damping coefficient must be nonnegative (min sampled value " +
                             std::to_string(d.omega_min) + ")");
    return d;
}

} // namespace piezo
