#include "piezo/fem.hpp"
#include "piezo/errors.hpp"

#include <doctest.h>
#include <random>

using namespace piezo;

namespace {

TriMesh two_triangle_square() {
    TriMesh m;
    m.vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    m.triangles = {{0, 1, 2}, {0, 2, 3}};
    m.finalize();
    return m;
}

PiezoMaterial paper_material() {
    PiezoMaterial m;
    m.c_voigt << 2.118, 0.6, 0.0, 0.6, 2.118, 0.0, 0.0, 0.0, 0.9;
    m.e_voigt << 1, 5, 5, 5, 1, 5;
    m.set_kappa_voigt(4, 4, 1);
    return m;
}

// Dense Gaussian elimination with partial pivoting, independent of the
// sparse solver path used by solve_electric.
Eigen::VectorXd dense_lu_solve(Eigen::MatrixXd A, Eigen::VectorXd b) {
    const int n = static_cast<int>(A.rows());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(A(r, col)) > std::abs(A(piv, col))) piv = r;
        if (piv != col) {
            A.row(piv).swap(A.row(col));
            std::swap(b(piv), b(col));
        }
        for (int r = col + 1; r < n; ++r) {
            double f = A(r, col) / A(col, col);
            A.row(r).tail(n - col) -= f * A.row(col).tail(n - col);
            b(r) -= f * b(col);
        }
    }
    Eigen::VectorXd x(n);
    for (int r = n - 1; r >= 0; --r) {
        double s = b(r) - A.row(r).tail(n - r - 1).dot(x.tail(n - r - 1));
        x(r) = s / A(r, r);
    }
    return x;
}

} // namespace

TEST_CASE("dof counts on the two-triangle square") {
    TriMesh m = two_triangle_square();
    CHECK(build_spaces(m, 1).n_scalar == 4);
    CHECK(build_spaces(m, 2).n_scalar == 9);  // 4 vertices + 5 edges
    CHECK(build_spaces(m, 3).n_scalar == 16); // 4 + 2*5 + 2 interior
    CHECK_THROWS_AS(build_spaces(m, 5), ConfigError);
}

TEST_CASE("Dirichlet set covers all boundary nodes when Gamma_D is everything") {
    TriMesh m = make_pentagon_mesh(0.2);
    FemSpaces sp = build_spaces(m, 3);
    // boundary nodes = 3*panels per loop for k=3 (k+1 per panel, endpoints shared)
    CHECK(static_cast<int>(sp.dirichlet_dofs.size()) == 3 * m.n_panels());
    for (int d : sp.dirichlet_dofs) {
        // each Dirichlet dof geometrically on some panel segment
        bool on_panel = false;
        const Eigen::Vector2d p = sp.dof_points[static_cast<size_t>(d)];
        for (const Panel& pan : m.panels) {
            const Eigen::Vector2d a = m.vertices[static_cast<size_t>(pan.v0)];
            const Eigen::Vector2d b = m.vertices[static_cast<size_t>(pan.v1)];
            double cross = (b - a).x() * (p - a).y() - (b - a).y() * (p - a).x();
            double t = (p - a).dot(b - a) / (b - a).squaredNorm();
            if (std::abs(cross) < 1e-12 && t > -1e-12 && t < 1 + 1e-12) on_panel = true;
        }
        CHECK(on_panel);
    }
}

TEST_CASE("mass matrix sums to 2 rho area for constant density") {
    TriMesh m = make_pentagon_mesh(0.2);
    FemSpaces sp = build_spaces(m, 2);
    PiezoMaterial mat = paper_material();
    mat.rho = Expr::parse("3.7");
    FemBlocks blocks = assemble_blocks(m, sp, mat);
    double sum = Eigen::VectorXd::Ones(sp.n_vector()).transpose() * blocks.M_rho *
                 Eigen::VectorXd::Ones(sp.n_vector());
    CHECK(sum == doctest::Approx(2.0 * 3.7 * m.area()).epsilon(1e-12));
}

TEST_CASE("rigid motions span the kernel of the elastic stiffness") {
    TriMesh m = make_trapping_mesh(0.12);
    for (int k : {1, 3}) {
        FemSpaces sp = build_spaces(m, k);
        PiezoMaterial mat = paper_material();
        FemBlocks blocks = assemble_blocks(m, sp, mat);
        auto rm = rigid_motion_basis(sp);
        double knorm = blocks.K_C.norm();
        for (const auto& v : rm) CHECK((blocks.K_C * v).norm() <= 1e-10 * knorm);
        // linear independence: rank-3 Gram matrix
        Eigen::Matrix3d G;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) G(i, j) = rm[static_cast<size_t>(i)].dot(rm[static_cast<size_t>(j)]);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(G);
        CHECK(es.eigenvalues().minCoeff() > 1e-8);
        // K_C positive semidefinite on random vectors
        std::mt19937 rng(5);
        std::normal_distribution<double> g;
        for (int rep = 0; rep < 10; ++rep) {
            Eigen::VectorXd x(sp.n_vector());
            for (int i = 0; i < x.size(); ++i) x(i) = g(rng);
            CHECK(x.dot(blocks.K_C * x) > -1e-10 * knorm * x.squaredNorm());
        }
    }
}

TEST_CASE("zero piezo tensor gives exactly zero coupling") {
    TriMesh m = two_triangle_square();
    FemSpaces sp = build_spaces(m, 2);
    PiezoMaterial mat = paper_material();
    mat.e_voigt.setZero();
    FemBlocks blocks = assemble_blocks(m, sp, mat);
    CHECK(blocks.K_e.norm() == 0.0);
}

TEST_CASE("solve_electric: homogeneous problem gives zero potential") {
    TriMesh m = make_pentagon_mesh(0.25);
    FemSpaces sp = build_spaces(m, 2);
    PiezoMaterial mat = paper_material();
    mat.e_voigt.setZero();
    FemBlocks blocks = assemble_blocks(m, sp, mat);
    std::mt19937 rng(11);
    std::normal_distribution<double> g;
    Eigen::VectorXd u(sp.n_vector());
    for (int i = 0; i < u.size(); ++i) u(i) = g(rng);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sp.dirichlet_dofs.size()));
    Eigen::VectorXd psi = solve_electric(blocks, sp, u, {}, mu);
    CHECK(psi.norm() == 0.0);
}

TEST_CASE("solve_electric reproduces affine Dirichlet data exactly") {
    TriMesh m = make_square_mesh(0.34);
    for (int k : {1, 2, 3}) {
        FemSpaces sp = build_spaces(m, k);
        PiezoMaterial mat;
        mat.e_voigt.setZero(); // kappa = I by default
        FemBlocks blocks = assemble_blocks(m, sp, mat);
        auto f = [](const Eigen::Vector2d& p) { return 0.7 + 1.3 * p.x() - 2.1 * p.y(); };
        Eigen::VectorXd mu(static_cast<Eigen::Index>(sp.dirichlet_dofs.size()));
        for (size_t i = 0; i < sp.dirichlet_dofs.size(); ++i)
            mu(static_cast<Eigen::Index>(i)) = f(sp.dof_points[static_cast<size_t>(sp.dirichlet_dofs[i])]);
        Eigen::VectorXd psi =
            solve_electric(blocks, sp, Eigen::VectorXd::Zero(sp.n_vector()), {}, mu);
        for (int d = 0; d < sp.n_scalar; ++d)
            CHECK(psi(d) == doctest::Approx(f(sp.dof_points[static_cast<size_t>(d)])).epsilon(1e-11));
    }
}

TEST_CASE("solve_electric matches the dense LU oracle") {
    TriMesh m = two_triangle_square();
    FemSpaces sp = build_spaces(m, 2);
    PiezoMaterial mat = paper_material();
    FemBlocks blocks = assemble_blocks(m, sp, mat);
    std::mt19937 rng(23);
    std::normal_distribution<double> g;
    Eigen::VectorXd u(sp.n_vector());
    for (int i = 0; i < u.size(); ++i) u(i) = g(rng);
    Eigen::VectorXd mu(static_cast<Eigen::Index>(sp.dirichlet_dofs.size()));
    for (int i = 0; i < mu.size(); ++i) mu(i) = g(rng);

    Eigen::VectorXd psi = solve_electric(blocks, sp, u, {}, mu);

    // oracle: dense reduced system
    const int nf = sp.n_free();
    Eigen::MatrixXd Kd = Eigen::MatrixXd(blocks.K_kappa);
    Eigen::VectorXd lift = Eigen::VectorXd::Zero(sp.n_scalar);
    for (size_t i = 0; i < sp.dirichlet_dofs.size(); ++i)
        lift(sp.dirichlet_dofs[i]) = mu(static_cast<Eigen::Index>(i));
    Eigen::VectorXd rhs_full = blocks.K_e.transpose() * u - Kd * lift;
    Eigen::MatrixXd A(nf, nf);
    Eigen::VectorXd b(nf);
    for (int i = 0; i < nf; ++i) {
        b(i) = rhs_full(sp.free_dofs[static_cast<size_t>(i)]);
        for (int j = 0; j < nf; ++j)
            A(i, j) = Kd(sp.free_dofs[static_cast<size_t>(i)], sp.free_dofs[static_cast<size_t>(j)]);
    }
    Eigen::VectorXd xf = dense_lu_solve(A, b);
    for (int i = 0; i < nf; ++i) {
        double ref = xf(i);
        CHECK(psi(sp.free_dofs[static_cast<size_t>(i)]) == doctest::Approx(ref).epsilon(1e-10));
    }
    // and the Galerkin residual on free dofs vanishes
    Eigen::VectorXd res = blocks.K_kappa * psi - blocks.K_e.transpose() * u;
    for (int f = 0; f < nf; ++f)
        CHECK(std::abs(res(sp.free_dofs[static_cast<size_t>(f)])) < 1e-10 * (1.0 + res.norm()));
}

TEST_CASE("solve_electric is linear in its inputs") {
    TriMesh m = make_square_mesh(0.5);
    FemSpaces sp = build_spaces(m, 2);
    PiezoMaterial mat = paper_material();
    FemBlocks blocks = assemble_blocks(m, sp, mat);
    std::mt19937 rng(42);
    std::normal_distribution<double> g;
    auto rand_vec = [&](Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
        return v;
    };
    Eigen::Index nd = static_cast<Eigen::Index>(sp.dirichlet_dofs.size());
    Eigen::VectorXd u1 = rand_vec(sp.n_vector()), u2 = rand_vec(sp.n_vector());
    Eigen::VectorXd m1 = rand_vec(nd), m2 = rand_vec(nd);
    double a = 0.37, b = -1.21;
    Eigen::VectorXd lhs = solve_electric(blocks, sp, a * u1 + b * u2, {}, a * m1 + b * m2);
    Eigen::VectorXd rhs = a * solve_electric(blocks, sp, u1, {}, m1) +
                          b * solve_electric(blocks, sp, u2, {}, m2);
    CHECK((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
}

TEST_CASE("piezo coupling enters the coupled quadratic form antisymmetrically") {
    TriMesh m = make_pentagon_mesh(0.3);
    FemSpaces sp = build_spaces(m, 2);
    PiezoMaterial mat = paper_material();
    FemBlocks blocks = assemble_blocks(m, sp, mat);
    std::mt19937 rng(3);
    std::normal_distribution<double> g;
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd a(sp.n_scalar), b(sp.n_vector());
        for (int i = 0; i < a.size(); ++i) a(i) = g(rng);
        for (int i = 0; i < b.size(); ++i) b(i) = g(rng);
        double s1 = b.dot(blocks.K_e * a);
        double s2 = a.dot(blocks.K_e.transpose() * b);
        CHECK(s1 == doctest::Approx(s2).epsilon(1e-14));
    }
}
