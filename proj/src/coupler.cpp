#include "piezo/coupler.hpp"
#include "piezo/errors.hpp"
#include "piezo/quadrature.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

namespace piezo {

using Cd = Complexd;
using SpMatC = Eigen::SparseMatrix<Cd>;

CouplerSetup build_coupler(const TriMesh& mesh, const PiezoMaterial& material, int fem_order,
                           int bem_order) {
    CouplerSetup st;
    st.mesh = &mesh;
    st.material = material;
    st.fem = build_spaces(mesh, fem_order);
    st.blocks = assemble_blocks(mesh, st.fem, material);
    st.boundary = boundary_of(mesh);
    st.bspaces = build_boundary_spaces(st.boundary, bem_order);
    st.pq = make_panel_quadrature(st.boundary, 2 + 2 * std::max(fem_order, bem_order));

    if (material.piezo_active() && !mesh.has_dirichlet())
        throw ConfigError("piezoelectric coupling requires a nonempty Dirichlet boundary");

    const int ns = st.fem.n_scalar;
    const int k = fem_order;
    const int p = bem_order;
    const int nq = st.pq.size();

    std::vector<Eigen::Triplet<double>> t_tnu, t_b0, t_b1, t_b0x, t_eta;
    std::vector<double> trace(static_cast<size_t>(k + 1));
    std::vector<double> yv(static_cast<size_t>(p + 1)), xv(static_cast<size_t>(p));
    for (int q = 0; q < nq; ++q) {
        int panel = st.pq.panel_of[static_cast<size_t>(q)];
        double t = st.pq.param[static_cast<size_t>(q)];
        double w = st.pq.weights[static_cast<size_t>(q)];
        const Eigen::Vector2d& nrm = st.pq.normals[static_cast<size_t>(q)];
        y_basis_values(k, t, trace.data()); // FEM trace is the uniform-node Lagrange
        y_basis_values(p, t, yv.data());
        x_basis_values(p, t, xv.data());
        const auto& pd = st.fem.panel_dofs[static_cast<size_t>(panel)];
        const auto& yd = st.bspaces.panel_y_dofs[static_cast<size_t>(panel)];
        const auto& xd = st.bspaces.panel_x_dofs[static_cast<size_t>(panel)];
        for (int a = 0; a <= p; ++a) {
            t_b1.emplace_back(yd[static_cast<size_t>(a)], q, w * yv[static_cast<size_t>(a)]);
            for (int b = 0; b <= k; ++b) {
                double v = w * yv[static_cast<size_t>(a)] * trace[static_cast<size_t>(b)];
                t_tnu.emplace_back(yd[static_cast<size_t>(a)], pd[static_cast<size_t>(b)], v * nrm.x());
                t_tnu.emplace_back(yd[static_cast<size_t>(a)], ns + pd[static_cast<size_t>(b)], v * nrm.y());
            }
        }
        for (int a = 0; a < p; ++a)
            t_b0x.emplace_back(xd[static_cast<size_t>(a)], q, w * xv[static_cast<size_t>(a)]);
        for (int b = 0; b <= k; ++b) {
            double v = w * trace[static_cast<size_t>(b)];
            t_b0.emplace_back(pd[static_cast<size_t>(b)], q, v * nrm.x());
            t_b0.emplace_back(ns + pd[static_cast<size_t>(b)], q, v * nrm.y());
            if (mesh.panels[static_cast<size_t>(panel)].label == PanelLabel::Neumann)
                t_eta.emplace_back(pd[static_cast<size_t>(b)], q, v);
        }
    }
    auto build = [](int rows, int cols, std::vector<Eigen::Triplet<double>>& t) {
        SpMat m(rows, cols);
        m.setFromTriplets(t.begin(), t.end());
        m.makeCompressed();
        return m;
    };
    st.T_nu = build(st.bspaces.dim_y, 2 * ns, t_tnu);
    st.LoadB0 = build(2 * ns, nq, t_b0);
    st.LoadB1 = build(st.bspaces.dim_y, nq, t_b1);
    st.LoadB0X = build(st.bspaces.dim_x, nq, t_b0x);
    st.LoadEta = build(ns, nq, t_eta);

    // Dirichlet column slices and the reduced dielectric block
    const int nf = st.fem.n_free();
    const int nd = static_cast<int>(st.fem.dirichlet_dofs.size());
    std::vector<int> dir_index(static_cast<size_t>(ns), -1);
    for (int i = 0; i < nd; ++i) dir_index[static_cast<size_t>(st.fem.dirichlet_dofs[static_cast<size_t>(i)])] = i;

    std::vector<Eigen::Triplet<double>> t_ked, t_kfd, t_kff;
    for (int col = 0; col < st.blocks.K_e.outerSize(); ++col) {
        int d = dir_index[static_cast<size_t>(col)];
        if (d < 0) continue;
        for (SpMat::InnerIterator it(st.blocks.K_e, col); it; ++it)
            t_ked.emplace_back(static_cast<int>(it.row()), d, it.value());
    }
    for (int col = 0; col < st.blocks.K_kappa.outerSize(); ++col) {
        int fc = st.fem.free_index[static_cast<size_t>(col)];
        int dc = dir_index[static_cast<size_t>(col)];
        for (SpMat::InnerIterator it(st.blocks.K_kappa, col); it; ++it) {
            int fr = st.fem.free_index[static_cast<size_t>(it.row())];
            if (fr < 0) continue;
            if (fc >= 0)
                t_kff.emplace_back(fr, fc, it.value());
            else
                t_kfd.emplace_back(fr, dc, it.value());
        }
    }
    st.K_e_dir = build(2 * ns, std::max(nd, 1), t_ked);
    st.K_kappa_fd = build(nf, std::max(nd, 1), t_kfd);
    st.K_kappa_ff = build(nf, nf, t_kff);

    // warm shared rule caches before any parallel frequency work
    for (int n = 1; n <= 24; ++n) gauss_legendre(n);
    gauss_log(12);
    return st;
}

namespace {

// union sparse matrix over [u; psi_free] at frequency s; when the electric
// unknown is inert (e = 0, mu = eta = 0) only the elastic block is built so
// the elastic solve is bit-identical with or without the electric machinery
SpMatC union_matrix(const CouplerSetup& st, Cd s, bool with_psi) {
    const int nu = st.n_vec();
    const int nf = with_psi ? st.n_free() : 0;
    std::vector<Eigen::Triplet<Cd>> trips;
    trips.reserve(static_cast<size_t>(st.blocks.M_rho.nonZeros() + st.blocks.K_C.nonZeros() +
                                      2 * st.blocks.K_e.nonZeros() + st.K_kappa_ff.nonZeros()));
    Cd s2 = s * s;
    for (int col = 0; col < nu; ++col) {
        for (SpMat::InnerIterator it(st.blocks.M_rho, col); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), col, s2 * it.value());
        for (SpMat::InnerIterator it(st.blocks.K_C, col); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), col, Cd(it.value()));
        if (st.blocks.M_omega.nonZeros() > 0)
            for (SpMat::InnerIterator it(st.blocks.M_omega, col); it; ++it)
                trips.emplace_back(static_cast<int>(it.row()), col, s * it.value());
    }
    if (with_psi) {
        // K_e on free columns, and its negative transpose
        for (int col = 0; col < st.blocks.K_e.outerSize(); ++col) {
            int fc = st.fem.free_index[static_cast<size_t>(col)];
            if (fc < 0) continue;
            for (SpMat::InnerIterator it(st.blocks.K_e, col); it; ++it) {
                trips.emplace_back(static_cast<int>(it.row()), nu + fc, Cd(it.value()));
                trips.emplace_back(nu + fc, static_cast<int>(it.row()), Cd(-it.value()));
            }
        }
        for (int col = 0; col < st.K_kappa_ff.outerSize(); ++col)
            for (SpMat::InnerIterator it(st.K_kappa_ff, col); it; ++it)
                trips.emplace_back(nu + static_cast<int>(it.row()), nu + col, Cd(it.value()));
    }
    SpMatC m(nu + nf, nu + nf);
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

} // namespace

FrequencySolution solve_frequency(const CouplerSetup& st, Cd s, const Eigen::VectorXcd& b0_hat,
                                  const Eigen::VectorXcd& b1_hat,
                                  const Eigen::VectorXcd& eta_hat,
                                  const Eigen::VectorXcd& mu_hat, bool acoustic_only) {
    const double c = st.material.c_sound();
    const double kappa0 = st.material.kappa0;
    const int nu = st.n_vec();
    const int nf = st.n_free();
    const int ns = st.fem.n_scalar;
    const int dimx = st.bspaces.dim_x;
    const int dimy = st.bspaces.dim_y;

    LayerOperators ops = assemble_operators(st.boundary, st.bspaces, s / c);

    FrequencySolution sol;
    sol.u = Eigen::VectorXcd::Zero(nu);
    sol.psi = Eigen::VectorXcd::Zero(ns);

    Eigen::MatrixXcd bmat(dimy + dimx, dimy + dimx); // rows: E3, E4; cols: lambda, phi
    Eigen::VectorXcd brhs = Eigen::VectorXcd::Zero(dimy + dimx);
    Eigen::MatrixXd mxy = Eigen::MatrixXd(st.bspaces.M_XY);

    // E3 blocks (rows 0..dimy-1)
    bmat.block(0, 0, dimy, dimx) = kappa0 * (ops.Kt - 0.5 * mxy.transpose().cast<Cd>());
    bmat.block(0, dimx, dimy, dimy) = kappa0 * ops.W;
    brhs.head(dimy) = -(st.LoadB1 * b1_hat);
    // E4 blocks (rows dimy..)
    bmat.block(dimy, 0, dimx, dimx) = ops.V;
    bmat.block(dimy, dimx, dimx, dimy) = 0.5 * mxy.cast<Cd>() - ops.K;

    Eigen::VectorXcd base_u;                 // union solution with phi = 0
    Eigen::MatrixXcd coupling;               // union solutions for T_nu^T columns
    std::optional<Eigen::SparseLU<SpMatC>> solver;

    if (!acoustic_only) {
        const bool electric_inert =
            !st.material.piezo_active() &&
            (mu_hat.size() == 0 || mu_hat.isZero(0.0)) &&
            (eta_hat.size() == 0 || eta_hat.isZero(0.0));
        const int npsi = electric_inert ? 0 : nf;
        SpMatC A = union_matrix(st, s, !electric_inert);
        solver.emplace();
        solver->compute(A);
        if (solver->info() != Eigen::Success)
            throw NumericalError("interior frequency system factorization failed");

        Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(nu + npsi);
        rhs.head(nu) = -s * (st.LoadB0 * b0_hat);
        if (!electric_inert) {
            if (mu_hat.size() > 0) {
                rhs.head(nu) -= st.K_e_dir * mu_hat;
                rhs.tail(nf) -= st.K_kappa_fd * mu_hat;
            }
            if (eta_hat.size() > 0) {
                Eigen::VectorXcd eta_load = st.LoadEta * eta_hat;
                for (int f = 0; f < nf; ++f)
                    rhs(nu + f) -= eta_load(st.fem.free_dofs[static_cast<size_t>(f)]);
            }
        }
        base_u = solver->solve(rhs);

        Eigen::MatrixXcd tcols = Eigen::MatrixXcd::Zero(nu + npsi, dimy);
        tcols.topRows(nu) = s * Eigen::MatrixXd(st.T_nu).transpose().cast<Cd>();
        coupling = solver->solve(tcols);

        // E3 u-coupling: s T_nu u with u = base + coupling*phi
        bmat.block(0, dimx, dimy, dimy) +=
            s * (Eigen::MatrixXd(st.T_nu).cast<Cd>() * coupling.topRows(nu));
        brhs.head(dimy) -= s * (st.T_nu.cast<Cd>() * base_u.head(nu));
    } else {
        brhs.tail(dimx) = -(st.LoadB0X * b0_hat);
    }

    Eigen::PartialPivLU<Eigen::MatrixXcd> blu(bmat);
    Eigen::VectorXcd bsol = blu.solve(brhs);
    double res = (bmat * bsol - brhs).norm();
    if (!std::isfinite(res) || (brhs.norm() > 0 && res > 1e-6 * brhs.norm()))
        throw NumericalError("boundary frequency system solve failed");
    sol.lambda = bsol.head(dimx);
    sol.phi = bsol.tail(dimy);

    if (!acoustic_only) {
        Eigen::VectorXcd full = base_u + coupling * sol.phi;
        sol.u = full.head(nu);
        if (full.size() == nu + nf)
            for (int f = 0; f < nf; ++f)
                sol.psi(st.fem.free_dofs[static_cast<size_t>(f)]) = full(nu + f);
        if (mu_hat.size() > 0)
            for (size_t i = 0; i < st.fem.dirichlet_dofs.size(); ++i)
                sol.psi(st.fem.dirichlet_dofs[i]) = mu_hat(static_cast<Eigen::Index>(i));
    }
    return sol;
}

SimulationResult solve_coupled(const CouplerSetup& st, const CqScheme& scheme,
                               const CoupledProblem& prob) {
    const int nt = scheme.n_times();
    const int nq = st.pq.size();
    const int nd = static_cast<int>(st.fem.dirichlet_dofs.size());
    const int nu = st.n_vec();
    const int ns = st.fem.n_scalar;
    const int dimx = st.bspaces.dim_x;
    const int dimy = st.bspaces.dim_y;
    const int nrec = static_cast<int>(prob.receivers.size());
    const double c = st.material.c_sound();
    const double sgn = prob.flip_beta_signs ? -1.0 : 1.0;

    // receivers must lie outside the solid
    for (const auto& r : prob.receivers)
        if (st.mesh->contains(r))
            throw ConfigError("receiver point lies inside the solid domain");

    // sample the boundary data
    Eigen::MatrixXd b0(nt, nq), b1(nt, nq);
    Eigen::MatrixXd mu(nt, std::max(nd, 1));
    Eigen::MatrixXd eta(nt, nq);
    const bool has_eta = static_cast<bool>(prob.eta);
    for (int n = 0; n < nt; ++n) {
        double t = scheme.time(n);
        for (int q = 0; q < nq; ++q) {
            const Eigen::Vector2d& x = st.pq.points[static_cast<size_t>(q)];
            b0(n, q) = sgn * prob.incident.value(x, t);
            b1(n, q) = sgn * st.material.kappa0 *
                       prob.incident.gradient(x, t).dot(st.pq.normals[static_cast<size_t>(q)]);
            eta(n, q) = has_eta ? prob.eta(x, t) : 0.0;
        }
        for (int d = 0; d < nd; ++d) mu(n, d) = prob.grounding.value(t);
    }
    double data_scale = std::max({b0.cwiseAbs().maxCoeff(), b1.cwiseAbs().maxCoeff(),
                                  mu.cwiseAbs().maxCoeff(), eta.cwiseAbs().maxCoeff(), 1e-300});
    double initial = std::max({b0.row(0).cwiseAbs().maxCoeff(), b1.row(0).cwiseAbs().maxCoeff(),
                               mu.row(0).cwiseAbs().maxCoeff(), eta.row(0).cwiseAbs().maxCoeff()});
    if (initial > 1e-12 * data_scale)
        throw ConfigError("non-causal data: boundary data nonzero at t = 0");

    // forward transforms, one sequence per sample site
    const int nl = prob.full_spectrum ? nt : scheme.n_half();
    Eigen::MatrixXcd b0_hat(nl, nq), b1_hat(nl, nq), eta_hat(nl, nq), mu_hat(nl, std::max(nd, 1));
    {
        std::vector<double> seq(static_cast<size_t>(nt));
        auto fwd = [&](const Eigen::MatrixXd& in, Eigen::MatrixXcd& out, int cols) {
            for (int j = 0; j < cols; ++j) {
                for (int n = 0; n < nt; ++n) seq[static_cast<size_t>(n)] = in(n, j);
                auto spec = scheme.forward(seq);
                for (int l = 0; l < nl; ++l) out(l, j) = spec[static_cast<size_t>(l)];
            }
        };
        fwd(b0, b0_hat, nq);
        fwd(b1, b1_hat, nq);
        fwd(eta, eta_hat, nq);
        fwd(mu, mu_hat, std::max(nd, 1));
    }

    // per-frequency solves (independent, deterministic slot writes)
    Eigen::MatrixXcd u_spec(nl, nu), psi_spec(nl, ns), lam_spec(nl, dimx), phi_spec(nl, dimy);
    Eigen::MatrixXcd rec_spec(nl, std::max(nrec, 1));
    std::atomic<int> next(0);
    std::atomic<bool> failed(false);
    std::string fail_msg;
    std::mutex fail_mutex;
    auto worker = [&]() {
        while (true) {
            int l = next.fetch_add(1);
            if (l >= nl || failed.load()) return;
            try {
                Cd s = scheme.frequency(l);
                Eigen::VectorXcd mu_l = nd > 0 ? mu_hat.row(l).transpose().eval()
                                               : Eigen::VectorXcd();
                FrequencySolution fs = solve_frequency(
                    st, s, b0_hat.row(l).transpose(), b1_hat.row(l).transpose(),
                    has_eta ? eta_hat.row(l).transpose().eval() : Eigen::VectorXcd(), mu_l,
                    prob.acoustic_only);
                u_spec.row(l) = fs.u.transpose();
                psi_spec.row(l) = fs.psi.transpose();
                lam_spec.row(l) = fs.lambda.transpose();
                phi_spec.row(l) = fs.phi.transpose();
                if (nrec > 0) {
                    Eigen::VectorXcd rv = eval_potentials(st.boundary, st.bspaces, s / c,
                                                          fs.lambda, fs.phi, prob.receivers);
                    rec_spec.row(l) = rv.transpose();
                }
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(fail_mutex);
                failed.store(true);
                fail_msg = "frequency " + std::to_string(l) + ": " + e.what();
            }
        }
    };
    int nthreads = prob.threads > 0 ? prob.threads
                                    : std::max(1u, std::thread::hardware_concurrency());
    {
        std::vector<std::thread> pool;
        for (int i = 1; i < nthreads; ++i) pool.emplace_back(worker);
        worker();
        for (auto& th : pool) th.join();
    }
    if (failed.load()) throw NumericalError("frequency solve failed at " + fail_msg);

    // inverse transforms
    SimulationResult res;
    res.times = scheme.times();
    res.u_hist.resize(nt, nu);
    res.psi_hist.resize(nt, ns);
    res.lambda_hist.resize(nt, dimx);
    res.phi_hist.resize(nt, dimy);
    res.receiver_scattered.resize(nt, std::max(nrec, 1));
    res.receiver_total.resize(nt, std::max(nrec, 1));

    auto inv = [&](const Eigen::MatrixXcd& spec, Eigen::MatrixXd& hist, int cols) {
        std::vector<Cd> half(static_cast<size_t>(scheme.n_half()));
        std::vector<Cd> full(static_cast<size_t>(nt));
        for (int j = 0; j < cols; ++j) {
            std::vector<double> back;
            if (prob.full_spectrum) {
                for (int l = 0; l < nt; ++l) full[static_cast<size_t>(l)] = spec(l, j);
                auto b = scheme.inverse(full);
                back.resize(static_cast<size_t>(nt));
                for (int n = 0; n < nt; ++n) back[static_cast<size_t>(n)] = b[static_cast<size_t>(n)].real();
            } else {
                for (int l = 0; l < scheme.n_half(); ++l) half[static_cast<size_t>(l)] = spec(l, j);
                back = scheme.inverse_real_from_half(half);
            }
            for (int n = 0; n < nt; ++n) hist(n, j) = back[static_cast<size_t>(n)];
        }
    };
    inv(u_spec, res.u_hist, nu);
    inv(psi_spec, res.psi_hist, ns);
    inv(lam_spec, res.lambda_hist, dimx);
    inv(phi_spec, res.phi_hist, dimy);
    if (nrec > 0) {
        inv(rec_spec, res.receiver_scattered, nrec);
        for (int n = 0; n < nt; ++n)
            for (int r = 0; r < nrec; ++r)
                res.receiver_total(n, r) =
                    res.receiver_scattered(n, r) +
                    sgn * prob.incident.value(prob.receivers[static_cast<size_t>(r)], res.times[static_cast<size_t>(n)]);
    } else {
        res.receiver_scattered.setZero();
        res.receiver_total.setZero();
    }
    return res;
}

void compute_norm_timeseries(const CouplerSetup& st, const LayerOperators& ops1,
                             SimulationResult& res) {
    const int nt = static_cast<int>(res.times.size());
    const int ns = st.fem.n_scalar;
    res.norms.resize(nt, 6);
    Eigen::MatrixXd W1 = ops1.W.real();
    Eigen::MatrixXd V1 = ops1.V.real();
    Eigen::MatrixXd MY = Eigen::MatrixXd(st.bspaces.M_Y);
    for (int n = 0; n < nt; ++n) {
        Eigen::VectorXd psi = res.psi_hist.row(n).transpose();
        Eigen::VectorXd ux = res.u_hist.row(n).head(ns).transpose();
        Eigen::VectorXd uy = res.u_hist.row(n).tail(ns).transpose();
        Eigen::VectorXd lam = res.lambda_hist.row(n).transpose();
        Eigen::VectorXd phi = res.phi_hist.row(n).transpose();
        double psi_l2 = psi.dot(st.blocks.M_scalar * psi);
        double psi_h1 = psi.dot(st.blocks.K_scalar * psi);
        double u_l2 = ux.dot(st.blocks.M_scalar * ux) + uy.dot(st.blocks.M_scalar * uy);
        double u_h1 = u_l2 + ux.dot(st.blocks.K_scalar * ux) + uy.dot(st.blocks.K_scalar * uy);
        double phi_half = phi.dot(W1 * phi) + phi.dot(MY * phi);
        double lam_mhalf = lam.dot(V1 * lam);
        res.norms(n, 0) = std::sqrt(std::max(0.0, psi_l2));
        res.norms(n, 1) = std::sqrt(std::max(0.0, psi_h1));
        res.norms(n, 2) = std::sqrt(std::max(0.0, u_l2));
        res.norms(n, 3) = std::sqrt(std::max(0.0, u_h1));
        res.norms(n, 4) = std::sqrt(std::max(0.0, phi_half));
        res.norms(n, 5) = std::sqrt(std::max(0.0, lam_mhalf));
    }
}

std::vector<double> interior_conservation_run(const CouplerSetup& st, double T, int nsteps,
                                              unsigned seed) {
    const int nu = st.n_vec();
    const int nf = st.n_free();
    const int ns = st.fem.n_scalar;
    const double dt = T / nsteps;

    // random smooth initial displacement and velocity
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::VectorXd u0(nu), v0(nu);
    double a1 = uni(rng), a2 = uni(rng), a3 = uni(rng), a4 = uni(rng);
    double b1 = uni(rng), b2 = uni(rng), b3 = uni(rng), b4 = uni(rng);
    for (int d = 0; d < ns; ++d) {
        const Eigen::Vector2d& p = st.fem.dof_points[static_cast<size_t>(d)];
        u0(d) = a1 * std::sin(2 * p.x() + a2) * std::cos(1.5 * p.y());
        u0(ns + d) = a3 * std::cos(p.x()) * std::sin(2.5 * p.y() + a4);
        v0(d) = b1 * std::sin(1.3 * p.x() + b2);
        v0(ns + d) = b3 * std::cos(1.7 * p.y() + b4);
    }

    Eigen::SimplicialLDLT<SpMat> kff(st.K_kappa_ff);
    if (kff.info() != Eigen::Success)
        throw NumericalError("dielectric block is singular in the conservation run");
    auto solve_psi = [&](const Eigen::VectorXd& u) {
        Eigen::VectorXd rhs_full = st.blocks.K_e.transpose() * u;
        Eigen::VectorXd rhs(nf);
        for (int f = 0; f < nf; ++f) rhs(f) = rhs_full(st.fem.free_dofs[static_cast<size_t>(f)]);
        Eigen::VectorXd pf = kff.solve(rhs);
        Eigen::VectorXd psi = Eigen::VectorXd::Zero(ns);
        for (int f = 0; f < nf; ++f) psi(st.fem.free_dofs[static_cast<size_t>(f)]) = pf(f);
        return psi;
    };

    // midpoint step: unknowns (v^{n+1}, psi_f^{n+1})
    //   [M + dt/2 M_w + dt^2/4 K_C   dt/2 K_ef ] [v]   = rhs_v
    //   [-dt/2 K_ef^T                K_ff      ] [psi] = K_ef^T (u^n + dt/2 v^n)
    std::vector<Eigen::Triplet<double>> trips;
    const bool has_omega = st.blocks.M_omega.nonZeros() > 0;
    for (int col = 0; col < nu; ++col) {
        for (SpMat::InnerIterator it(st.blocks.M_rho, col); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), col, it.value());
        for (SpMat::InnerIterator it(st.blocks.K_C, col); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), col, 0.25 * dt * dt * it.value());
        if (has_omega)
            for (SpMat::InnerIterator it(st.blocks.M_omega, col); it; ++it)
                trips.emplace_back(static_cast<int>(it.row()), col, 0.5 * dt * it.value());
    }
    for (int col = 0; col < st.blocks.K_e.outerSize(); ++col) {
        int fc = st.fem.free_index[static_cast<size_t>(col)];
        if (fc < 0) continue;
        for (SpMat::InnerIterator it(st.blocks.K_e, col); it; ++it) {
            trips.emplace_back(static_cast<int>(it.row()), nu + fc, 0.5 * dt * it.value());
            trips.emplace_back(nu + fc, static_cast<int>(it.row()), -0.5 * dt * it.value());
        }
    }
    for (int col = 0; col < st.K_kappa_ff.outerSize(); ++col)
        for (SpMat::InnerIterator it(st.K_kappa_ff, col); it; ++it)
            trips.emplace_back(nu + static_cast<int>(it.row()), nu + col, it.value());
    SpMat A(nu + nf, nu + nf);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<SpMat> step_solver;
    step_solver.compute(A);
    if (step_solver.info() != Eigen::Success)
        throw NumericalError("conservation step matrix factorization failed");

    Eigen::VectorXd u = u0, v = v0;
    Eigen::VectorXd psi = solve_psi(u);
    auto energy = [&](const Eigen::VectorXd& uu, const Eigen::VectorXd& vv,
                      const Eigen::VectorXd& pp) {
        return 0.5 * vv.dot(st.blocks.M_rho * vv) + 0.5 * uu.dot(st.blocks.K_C * uu) +
               0.5 * pp.dot(st.blocks.K_kappa * pp);
    };
    std::vector<double> hist;
    hist.reserve(static_cast<size_t>(nsteps + 1));
    hist.push_back(energy(u, v, psi));
    Eigen::VectorXd rhs(nu + nf);
    for (int n = 0; n < nsteps; ++n) {
        // -dt/2 K_C (u^n + u^{n+1}) expands to -dt K_C u^n - dt^2/4 K_C (v^n + v^{n+1})
        rhs.head(nu) = st.blocks.M_rho * v - dt * (st.blocks.K_C * u) -
                       0.25 * dt * dt * (st.blocks.K_C * v) -
                       0.5 * dt * (st.blocks.K_e * psi);
        if (has_omega) rhs.head(nu) -= 0.5 * dt * (st.blocks.M_omega * v);
        Eigen::VectorXd ustar_rhs = st.blocks.K_e.transpose() * (u + 0.5 * dt * v);
        for (int f = 0; f < nf; ++f)
            rhs(nu + f) = ustar_rhs(st.fem.free_dofs[static_cast<size_t>(f)]);
        Eigen::VectorXd sol = step_solver.solve(rhs);
        Eigen::VectorXd vnew = sol.head(nu);
        Eigen::VectorXd unew = u + 0.5 * dt * (v + vnew);
        Eigen::VectorXd psinew = Eigen::VectorXd::Zero(ns);
        for (int f = 0; f < nf; ++f)
            psinew(st.fem.free_dofs[static_cast<size_t>(f)]) = sol(nu + f);
        u = unew;
        v = vnew;
        psi = psinew;
        hist.push_back(energy(u, v, psi));
    }
    return hist;
}

} // namespace piezo
