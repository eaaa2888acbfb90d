#include "piezo/fem.hpp"
#include "piezo/errors.hpp"
#include "piezo/quadrature.hpp"

#include <Eigen/SparseCholesky>
#include <fstream>
#include <map>

namespace piezo {

LagrangeBasis::LagrangeBasis(int k) : order(k) {
    if (k < 1 || k > 4) throw ConfigError("unsupported Lagrange order " + std::to_string(k));
    ndofs = (k + 1) * (k + 2) / 2;
    // lattice nodes (i/k, j/k), i+j <= k, and matching monomials x^a y^b
    std::vector<std::array<int, 2>> monos;
    for (int i = 0; i <= k; ++i) {
        for (int j = 0; i + j <= k; ++j) {
            nodes.emplace_back(double(i) / k, double(j) / k);
            node_bary.push_back({k - i - j, i, j});
            monos.push_back({i, j});
        }
    }
    Eigen::MatrixXd V(ndofs, ndofs);
    for (int r = 0; r < ndofs; ++r)
        for (int c = 0; c < ndofs; ++c)
            V(r, c) = std::pow(nodes[static_cast<size_t>(r)].x(), monos[static_cast<size_t>(c)][0]) *
                      std::pow(nodes[static_cast<size_t>(r)].y(), monos[static_cast<size_t>(c)][1]);
    coeff_ = V.fullPivLu().inverse(); // column c of coeff_^T: coefficients of phi_c
    monos_ = monos;
}

void LagrangeBasis::eval(const Eigen::Vector2d& p, double* values) const {
    for (int b = 0; b < ndofs; ++b) {
        double v = 0.0;
        for (int m = 0; m < ndofs; ++m)
            v += coeff_(m, b) * std::pow(p.x(), monos_[static_cast<size_t>(m)][0]) *
                 std::pow(p.y(), monos_[static_cast<size_t>(m)][1]);
        values[b] = v;
    }
}

void LagrangeBasis::grad(const Eigen::Vector2d& p, Eigen::Vector2d* grads) const {
    for (int b = 0; b < ndofs; ++b) {
        Eigen::Vector2d g(0.0, 0.0);
        for (int m = 0; m < ndofs; ++m) {
            int a = monos_[static_cast<size_t>(m)][0], c = monos_[static_cast<size_t>(m)][1];
            double co = coeff_(m, b);
            if (a > 0) g.x() += co * a * std::pow(p.x(), a - 1) * std::pow(p.y(), c);
            if (c > 0) g.y() += co * c * std::pow(p.x(), a) * std::pow(p.y(), c - 1);
        }
        grads[b] = g;
    }
}

FemSpaces build_spaces(const TriMesh& mesh, int order) {
    if (order < 1 || order > 4) throw ConfigError("unsupported FEM order " + std::to_string(order));
    LagrangeBasis basis(order);
    FemSpaces sp;
    sp.order = order;

    // Conforming dof identification by integer barycentric keys on the
    // global vertex ids (no floating point comparisons).
    std::map<std::vector<std::pair<int, int>>, int> ids;
    auto dof_id = [&](const std::array<int, 3>& tri, const std::array<int, 3>& bary,
                      const Eigen::Vector2d& pt) {
        std::vector<std::pair<int, int>> key;
        for (int v = 0; v < 3; ++v)
            if (bary[static_cast<size_t>(v)] > 0)
                key.emplace_back(tri[static_cast<size_t>(v)], bary[static_cast<size_t>(v)]);
        std::sort(key.begin(), key.end());
        auto it = ids.find(key);
        if (it != ids.end()) return it->second;
        int id = static_cast<int>(sp.dof_points.size());
        sp.dof_points.push_back(pt);
        ids.emplace(std::move(key), id);
        return id;
    };

    sp.element_dofs.resize(static_cast<size_t>(mesh.n_triangles()));
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[static_cast<size_t>(t)];
        const Eigen::Vector2d& a = mesh.vertices[static_cast<size_t>(tri[0])];
        const Eigen::Vector2d& b = mesh.vertices[static_cast<size_t>(tri[1])];
        const Eigen::Vector2d& c = mesh.vertices[static_cast<size_t>(tri[2])];
        auto& ed = sp.element_dofs[static_cast<size_t>(t)];
        ed.resize(static_cast<size_t>(basis.ndofs));
        for (int n = 0; n < basis.ndofs; ++n) {
            const auto& bar = basis.node_bary[static_cast<size_t>(n)];
            Eigen::Vector2d pt =
                (double(bar[0]) * a + double(bar[1]) * b + double(bar[2]) * c) / double(order);
            ed[static_cast<size_t>(n)] = dof_id(tri, bar, pt);
        }
    }
    sp.n_scalar = static_cast<int>(sp.dof_points.size());

    // panel trace dofs, ordered v0 -> v1, via the same keys
    sp.panel_dofs.resize(mesh.panels.size());
    for (size_t p = 0; p < mesh.panels.size(); ++p) {
        const Panel& pan = mesh.panels[p];
        auto& pd = sp.panel_dofs[p];
        pd.resize(static_cast<size_t>(order + 1));
        for (int t = 0; t <= order; ++t) {
            std::vector<std::pair<int, int>> key;
            if (order - t > 0) key.emplace_back(pan.v0, order - t);
            if (t > 0) key.emplace_back(pan.v1, t);
            std::sort(key.begin(), key.end());
            auto it = ids.find(key);
            if (it == ids.end()) throw NumericalError("panel trace dof not found");
            pd[static_cast<size_t>(t)] = it->second;
        }
    }

    sp.on_dirichlet.assign(static_cast<size_t>(sp.n_scalar), 0);
    for (size_t p = 0; p < mesh.panels.size(); ++p)
        if (mesh.panels[p].label == PanelLabel::Dirichlet)
            for (int d : sp.panel_dofs[p]) sp.on_dirichlet[static_cast<size_t>(d)] = 1;
    sp.free_index.assign(static_cast<size_t>(sp.n_scalar), -1);
    for (int d = 0; d < sp.n_scalar; ++d) {
        if (sp.on_dirichlet[static_cast<size_t>(d)])
            sp.dirichlet_dofs.push_back(d);
        else {
            sp.free_index[static_cast<size_t>(d)] = static_cast<int>(sp.free_dofs.size());
            sp.free_dofs.push_back(d);
        }
    }
    return sp;
}

namespace {

struct ElementGeometry {
    Eigen::Matrix2d jac;     // reference -> physical
    Eigen::Matrix2d jac_inv_t;
    double det = 0.0;
};

ElementGeometry element_geometry(const TriMesh& mesh, int t) {
    const auto& tri = mesh.triangles[static_cast<size_t>(t)];
    const Eigen::Vector2d& a = mesh.vertices[static_cast<size_t>(tri[0])];
    const Eigen::Vector2d& b = mesh.vertices[static_cast<size_t>(tri[1])];
    const Eigen::Vector2d& c = mesh.vertices[static_cast<size_t>(tri[2])];
    ElementGeometry g;
    g.jac.col(0) = b - a;
    g.jac.col(1) = c - a;
    g.det = g.jac.determinant();
    g.jac_inv_t = g.jac.inverse().transpose();
    return g;
}

} // namespace

FemBlocks assemble_blocks(const TriMesh& mesh, const FemSpaces& sp,
                          const PiezoMaterial& mat) {
    const int k = sp.order;
    LagrangeBasis basis(k);
    const TriangleRule& rule = triangle_rule(2 * k + 2);
    const int nq = rule.size();
    const int nd = basis.ndofs;
    const int ns = sp.n_scalar;

    // reference basis tables at the rule points
    Eigen::MatrixXd val(nq, nd);
    std::vector<Eigen::Matrix<double, 2, Eigen::Dynamic>> ref_grad(static_cast<size_t>(nq));
    {
        std::vector<double> v(static_cast<size_t>(nd));
        std::vector<Eigen::Vector2d> g(static_cast<size_t>(nd));
        for (int q = 0; q < nq; ++q) {
            basis.eval(rule.points[static_cast<size_t>(q)], v.data());
            basis.grad(rule.points[static_cast<size_t>(q)], g.data());
            ref_grad[static_cast<size_t>(q)].resize(2, nd);
            for (int b = 0; b < nd; ++b) {
                val(q, b) = v[static_cast<size_t>(b)];
                ref_grad[static_cast<size_t>(q)].col(b) = g[static_cast<size_t>(b)];
            }
        }
    }

    std::vector<Eigen::Triplet<double>> t_mrho, t_momega, t_kc, t_ke, t_kk, t_ms, t_ks;
    const bool has_omega = !(mat.omega.is_constant() && mat.omega.eval(0, 0) == 0.0);
    const Eigen::Matrix3d C = mat.c_voigt;
    const Eigen::Matrix<double, 2, 3> E = mat.e_voigt;
    const Eigen::Matrix2d Kp = mat.kappa_psi;

    Eigen::MatrixXd m_loc(nd, nd), mw_loc(nd, nd), kk_loc(nd, nd), ms_loc(nd, nd), ks_loc(nd, nd);
    Eigen::MatrixXd kc_loc(2 * nd, 2 * nd), ke_loc(2 * nd, nd);
    Eigen::Matrix<double, 2, Eigen::Dynamic> grad_phys(2, nd);

    for (int t = 0; t < mesh.n_triangles(); ++t) {
        ElementGeometry geo = element_geometry(mesh, t);
        const auto& ed = sp.element_dofs[static_cast<size_t>(t)];
        const auto& tri = mesh.triangles[static_cast<size_t>(t)];
        const Eigen::Vector2d& a = mesh.vertices[static_cast<size_t>(tri[0])];

        m_loc.setZero();
        mw_loc.setZero();
        kk_loc.setZero();
        ms_loc.setZero();
        ks_loc.setZero();
        kc_loc.setZero();
        ke_loc.setZero();

        for (int q = 0; q < nq; ++q) {
            Eigen::Vector2d xq = a + geo.jac * rule.points[static_cast<size_t>(q)];
            double w = rule.weights[static_cast<size_t>(q)] * geo.det;
            double rho = mat.rho.eval(xq.x(), xq.y());
            double om = has_omega ? mat.omega.eval(xq.x(), xq.y()) : 0.0;
            grad_phys = geo.jac_inv_t * ref_grad[static_cast<size_t>(q)];

            for (int i = 0; i < nd; ++i) {
                double vi = val(q, i);
                const Eigen::Vector2d gi = grad_phys.col(i);
                // Voigt strains of (phi_i, 0) and (0, phi_i)
                Eigen::Vector3d ex_i(gi.x(), 0.0, gi.y());
                Eigen::Vector3d ey_i(0.0, gi.y(), gi.x());
                Eigen::Vector3d Cex = C * ex_i, Cey = C * ey_i;
                for (int j = 0; j < nd; ++j) {
                    double vj = val(q, j);
                    const Eigen::Vector2d gj = grad_phys.col(j);
                    m_loc(i, j) += w * rho * vi * vj;
                    if (has_omega) mw_loc(i, j) += w * om * vi * vj;
                    ms_loc(i, j) += w * vi * vj;
                    ks_loc(i, j) += w * gi.dot(gj);
                    kk_loc(i, j) += w * gi.dot(Kp * gj);
                    Eigen::Vector3d ex_j(gj.x(), 0.0, gj.y());
                    Eigen::Vector3d ey_j(0.0, gj.y(), gj.x());
                    kc_loc(i, j) += w * Cex.dot(ex_j);
                    kc_loc(i, nd + j) += w * Cex.dot(ey_j);
                    kc_loc(nd + i, j) += w * Cey.dot(ex_j);
                    kc_loc(nd + i, nd + j) += w * Cey.dot(ey_j);
                    // (e grad phi_j) : eps(w_i) = eps_V(w_i) . E^T grad phi_j
                    Eigen::Vector3d Eg = E.transpose() * gj;
                    ke_loc(i, j) += w * ex_i.dot(Eg);
                    ke_loc(nd + i, j) += w * ey_i.dot(Eg);
                }
            }
        }

        for (int i = 0; i < nd; ++i) {
            int gi = ed[static_cast<size_t>(i)];
            for (int j = 0; j < nd; ++j) {
                int gj = ed[static_cast<size_t>(j)];
                double m = m_loc(i, j);
                t_mrho.emplace_back(gi, gj, m);
                t_mrho.emplace_back(ns + gi, ns + gj, m);
                if (has_omega) {
                    t_momega.emplace_back(gi, gj, mw_loc(i, j));
                    t_momega.emplace_back(ns + gi, ns + gj, mw_loc(i, j));
                }
                t_ms.emplace_back(gi, gj, ms_loc(i, j));
                t_ks.emplace_back(gi, gj, ks_loc(i, j));
                t_kk.emplace_back(gi, gj, kk_loc(i, j));
                t_kc.emplace_back(gi, gj, kc_loc(i, j));
                t_kc.emplace_back(gi, ns + gj, kc_loc(i, nd + j));
                t_kc.emplace_back(ns + gi, gj, kc_loc(nd + i, j));
                t_kc.emplace_back(ns + gi, ns + gj, kc_loc(nd + i, nd + j));
                t_ke.emplace_back(gi, gj, ke_loc(i, j));
                t_ke.emplace_back(ns + gi, gj, ke_loc(nd + i, j));
            }
        }
    }

    FemBlocks blocks;
    auto build = [](int rows, int cols, std::vector<Eigen::Triplet<double>>& trips) {
        SpMat m(rows, cols);
        m.setFromTriplets(trips.begin(), trips.end());
        m.makeCompressed();
        return m;
    };
    blocks.M_rho = build(2 * ns, 2 * ns, t_mrho);
    blocks.M_omega = build(2 * ns, 2 * ns, t_momega);
    blocks.K_C = build(2 * ns, 2 * ns, t_kc);
    blocks.K_e = build(2 * ns, ns, t_ke);
    blocks.K_kappa = build(ns, ns, t_kk);
    blocks.M_scalar = build(ns, ns, t_ms);
    blocks.K_scalar = build(ns, ns, t_ks);
    return blocks;
}

Eigen::VectorXd solve_electric(const FemBlocks& blocks, const FemSpaces& sp,
                               const Eigen::VectorXd& u_dofs,
                               const Eigen::VectorXd& eta_load,
                               const Eigen::VectorXd& mu_dirichlet_values) {
    const int ns = sp.n_scalar;
    const int nf = sp.n_free();
    if (u_dofs.size() != 2 * ns) throw NumericalError("solve_electric: u size mismatch");
    if (mu_dirichlet_values.size() != static_cast<Eigen::Index>(sp.dirichlet_dofs.size()))
        throw NumericalError("solve_electric: mu size mismatch");

    Eigen::VectorXd psi = Eigen::VectorXd::Zero(ns);
    for (size_t i = 0; i < sp.dirichlet_dofs.size(); ++i)
        psi(sp.dirichlet_dofs[i]) = mu_dirichlet_values(static_cast<Eigen::Index>(i));

    // rhs on free dofs: K_e^T u - eta_load - K_kappa * lift
    Eigen::VectorXd rhs_full = blocks.K_e.transpose() * u_dofs - blocks.K_kappa * psi;
    if (eta_load.size() > 0) rhs_full -= eta_load;

    Eigen::VectorXd rhs(nf);
    for (int f = 0; f < nf; ++f) rhs(f) = rhs_full(sp.free_dofs[static_cast<size_t>(f)]);

    // reduced SPD system
    std::vector<Eigen::Triplet<double>> trips;
    for (int col = 0; col < blocks.K_kappa.outerSize(); ++col) {
        int fc = sp.free_index[static_cast<size_t>(col)];
        if (fc < 0) continue;
        for (SpMat::InnerIterator it(blocks.K_kappa, col); it; ++it) {
            int fr = sp.free_index[static_cast<size_t>(it.row())];
            if (fr >= 0) trips.emplace_back(fr, fc, it.value());
        }
    }
    SpMat Kff(nf, nf);
    Kff.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<SpMat> solver(Kff);
    if (solver.info() != Eigen::Success)
        throw NumericalError("solve_electric: reduced dielectric system is singular");
    Eigen::VectorXd psi_f = solver.solve(rhs);
    for (int f = 0; f < nf; ++f) psi(sp.free_dofs[static_cast<size_t>(f)]) = psi_f(f);
    return psi;
}

std::array<Eigen::VectorXd, 3> rigid_motion_basis(const FemSpaces& sp) {
    const int ns = sp.n_scalar;
    std::array<Eigen::VectorXd, 3> m;
    for (auto& v : m) v = Eigen::VectorXd::Zero(2 * ns);
    for (int d = 0; d < ns; ++d) {
        const Eigen::Vector2d& p = sp.dof_points[static_cast<size_t>(d)];
        m[0](d) = 1.0;
        m[1](ns + d) = 1.0;
        m[2](d) = -p.y();
        m[2](ns + d) = p.x();
    }
    return m;
}

void dump_coo(const SpMat& m, const std::string& path) {
    std::ofstream out(path);
    out << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
    char buf[96];
    for (int col = 0; col < m.outerSize(); ++col) {
        for (SpMat::InnerIterator it(m, col); it; ++it) {
            std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", static_cast<long>(it.row()),
                          static_cast<long>(it.col()), it.value());
            out << buf;
        }
    }
}

} // namespace piezo
