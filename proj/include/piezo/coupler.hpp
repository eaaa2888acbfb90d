#ifndef PIEZO_COUPLER_HPP
#define PIEZO_COUPLER_HPP

#include "piezo/bem.hpp"
#include "piezo/cq.hpp"
#include "piezo/fem.hpp"
#include "piezo/incident.hpp"
#include "piezo/material.hpp"
#include "piezo/mesh.hpp"

#include <functional>
#include <optional>

namespace piezo {

// Frequency-independent assembly shared by every CQ frequency solve.
struct CouplerSetup {
    const TriMesh* mesh = nullptr;
    PiezoMaterial material;
    FemSpaces fem;
    FemBlocks blocks;
    BoundaryCurve boundary;
    BoundarySpaces bspaces;
    PanelQuadrature pq;

    SpMat T_nu;      // dim_y x 2Ns: <zeta_j, w_i . nu>
    SpMat LoadB0;    // 2Ns x nq:   beta0 samples -> <beta0, w.nu>
    SpMat LoadB1;    // dim_y x nq: beta1 samples -> <beta1, zeta>
    SpMat LoadB0X;   // dim_x x nq: beta0 samples -> <chi, beta0>
    SpMat LoadEta;   // Ns x nq:    eta samples (Neumann panels) -> <eta, phi>
    SpMat K_e_dir;   // 2Ns x n_dirichlet
    SpMat K_kappa_fd; // n_free x n_dirichlet
    SpMat K_kappa_ff; // n_free x n_free

    int n_vec() const { return fem.n_vector(); }
    int n_free() const { return fem.n_free(); }
};

CouplerSetup build_coupler(const TriMesh& mesh, const PiezoMaterial& material, int fem_order,
                           int bem_order);

// One CQ frequency: the four-block system
//   (E1) s^2 M_rho u + s M_omega u + K_C u + K_e psi - s T_nu^T phi = -s B0 b0 - lift
//   (E2) -K_e^T u + K_kappa psi = -N eta - lift
//   (E3) s T_nu u + kappa0((-1/2 M_XY^T + Kt)lambda + W phi) = -B1 b1
//   (E4) V lambda + (1/2 M_XY - K) phi = 0   [or = -<chi, b0> when the solid
//        is frozen in the acoustic-only mode]
struct FrequencySolution {
    Eigen::VectorXcd u;      // 2Ns
    Eigen::VectorXcd psi;    // Ns (full, lifted)
    Eigen::VectorXcd lambda; // dim_x
    Eigen::VectorXcd phi;    // dim_y
};

FrequencySolution solve_frequency(const CouplerSetup& setup, Complexd s,
                                  const Eigen::VectorXcd& b0_hat,
                                  const Eigen::VectorXcd& b1_hat,
                                  const Eigen::VectorXcd& eta_hat,
                                  const Eigen::VectorXcd& mu_hat, bool acoustic_only);

struct CoupledProblem {
    IncidentWave incident;
    GroundingSignal grounding;
    std::function<double(const Eigen::Vector2d&, double)> eta; // optional
    std::vector<Eigen::Vector2d> receivers;
    bool acoustic_only = false;
    bool flip_beta_signs = false;
    bool full_spectrum = false; // solve every frequency instead of mirroring
    int threads = 0;            // 0: hardware concurrency
};

struct SimulationResult {
    std::vector<double> times;
    Eigen::MatrixXd u_hist;             // n_times x 2Ns
    Eigen::MatrixXd psi_hist;           // n_times x Ns
    Eigen::MatrixXd lambda_hist;        // n_times x dim_x
    Eigen::MatrixXd phi_hist;           // n_times x dim_y
    Eigen::MatrixXd receiver_scattered; // n_times x nrec
    Eigen::MatrixXd receiver_total;    // incident + scattered
    Eigen::MatrixXd norms;              // n_times x 6:
    // |psi|_L2, |grad psi|_L2, |u|_L2, |u|_H1, |phi|_1/2, |lambda|_-1/2
};

SimulationResult solve_coupled(const CouplerSetup& setup, const CqScheme& scheme,
                               const CoupledProblem& problem);

// Norm table for given histories; ops1 are the layer operators at s = 1.
void compute_norm_timeseries(const CouplerSetup& setup, const LayerOperators& ops1,
                             SimulationResult& result);

// Trapezoidal integration of the interior piezoelectric system with the
// boundary exchange switched off and random smooth initial data; returns the
// discrete energy history E(t) = 1/2 v'Mv + 1/2 u'K_C u + 1/2 psi'K_kappa psi.
std::vector<double> interior_conservation_run(const CouplerSetup& setup, double T, int nsteps,
                                              unsigned seed);

} // namespace piezo

#endif
