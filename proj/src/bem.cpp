#include "piezo/bem.hpp"
#include "piezo/bessel.hpp"
#include "piezo/errors.hpp"
#include "piezo/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace piezo {

using Cd = Complexd;

Cd helmholtz_kernel(Cd s, double r) {
    if (!(r > 0.0)) throw NumericalError("helmholtz_kernel: r must be positive");
    if (!(s.real() > 0.0)) throw NumericalError("helmholtz_kernel: Re s must be positive");
    return bessel_k0(s * r) / (2.0 * M_PI);
}

// ---------------------------------------------------------------------------
// panel-local bases

void x_basis_values(int order, double t, double* vals) {
    // shifted Legendre, degrees 0..order-1
    double x = 2.0 * t - 1.0;
    double pm1 = 0.0, p0 = 1.0;
    for (int k = 0; k < order; ++k) {
        vals[k] = p0;
        double p1 = ((2.0 * k + 1.0) * x * p0 - k * pm1) / (k + 1.0);
        pm1 = p0;
        p0 = p1;
    }
}

void y_basis_values(int order, double t, double* vals) {
    const int n = order + 1;
    for (int j = 0; j < n; ++j) {
        double tj = double(j) / order;
        double v = 1.0;
        for (int m = 0; m < n; ++m) {
            if (m == j) continue;
            double tm = double(m) / order;
            v *= (t - tm) / (tj - tm);
        }
        vals[j] = v;
    }
}

void y_basis_derivs(int order, double t, double* vals) {
    const int n = order + 1;
    for (int j = 0; j < n; ++j) {
        double tj = double(j) / order;
        double sum = 0.0;
        for (int k = 0; k < n; ++k) {
            if (k == j) continue;
            double tk = double(k) / order;
            double prod = 1.0 / (tj - tk);
            for (int m = 0; m < n; ++m) {
                if (m == j || m == k) continue;
                double tm = double(m) / order;
                prod *= (t - tm) / (tj - tm);
            }
            sum += prod;
        }
        vals[j] = sum;
    }
}

// ---------------------------------------------------------------------------

BoundarySpaces build_boundary_spaces(const BoundaryCurve& boundary, int order) {
    if (order < 1 || order > 4) throw ConfigError("unsupported boundary element order");
    BoundarySpaces sp;
    sp.order = order;
    sp.n_panels = static_cast<int>(boundary.panels.size());
    const int p = order;

    sp.panel_x_dofs.resize(static_cast<size_t>(sp.n_panels));
    for (int i = 0; i < sp.n_panels; ++i) {
        auto& xd = sp.panel_x_dofs[static_cast<size_t>(i)];
        xd.resize(static_cast<size_t>(p));
        for (int d = 0; d < p; ++d) xd[static_cast<size_t>(d)] = i * p + d;
    }
    sp.dim_x = sp.n_panels * p;

    sp.panel_y_dofs.resize(static_cast<size_t>(sp.n_panels));
    int offset = 0;
    for (const auto& loop : boundary.loops) {
        int count = loop.end - loop.begin;
        for (int i = loop.begin; i < loop.end; ++i) {
            auto& yd = sp.panel_y_dofs[static_cast<size_t>(i)];
            yd.resize(static_cast<size_t>(p + 1));
            for (int j = 0; j < p; ++j) yd[static_cast<size_t>(j)] = offset + (i - loop.begin) * p + j;
            int next = loop.begin + ((i - loop.begin + 1) % count);
            yd[static_cast<size_t>(p)] = offset + (next - loop.begin) * p;
        }
        offset += count * p;
    }
    sp.dim_y = offset;

    sp.y_dof_points.assign(static_cast<size_t>(sp.dim_y), Eigen::Vector2d::Zero());
    for (int i = 0; i < sp.n_panels; ++i)
        for (int j = 0; j <= p; ++j)
            sp.y_dof_points[static_cast<size_t>(sp.panel_y_dofs[static_cast<size_t>(i)][static_cast<size_t>(j)])] =
                boundary.point(i, double(j) / p);

    // masses
    std::vector<Eigen::Triplet<double>> txy, tx, ty;
    const Rule1D& rule = gauss_legendre(p + 2);
    std::vector<double> xv(static_cast<size_t>(p)), yv(static_cast<size_t>(p + 1));
    for (int i = 0; i < sp.n_panels; ++i) {
        double len = boundary.panels[static_cast<size_t>(i)].length;
        Eigen::MatrixXd mxy = Eigen::MatrixXd::Zero(p, p + 1);
        Eigen::MatrixXd my = Eigen::MatrixXd::Zero(p + 1, p + 1);
        for (int q = 0; q < rule.size(); ++q) {
            double t = rule.points[static_cast<size_t>(q)];
            double w = rule.weights[static_cast<size_t>(q)] * len;
            x_basis_values(p, t, xv.data());
            y_basis_values(p, t, yv.data());
            for (int a = 0; a < p; ++a)
                for (int b = 0; b <= p; ++b) mxy(a, b) += w * xv[static_cast<size_t>(a)] * yv[static_cast<size_t>(b)];
            for (int a = 0; a <= p; ++a)
                for (int b = 0; b <= p; ++b) my(a, b) += w * yv[static_cast<size_t>(a)] * yv[static_cast<size_t>(b)];
        }
        const auto& xd = sp.panel_x_dofs[static_cast<size_t>(i)];
        const auto& yd = sp.panel_y_dofs[static_cast<size_t>(i)];
        for (int a = 0; a < p; ++a) {
            tx.emplace_back(xd[static_cast<size_t>(a)], xd[static_cast<size_t>(a)], len / (2.0 * a + 1.0));
            for (int b = 0; b <= p; ++b)
                txy.emplace_back(xd[static_cast<size_t>(a)], yd[static_cast<size_t>(b)], mxy(a, b));
        }
        for (int a = 0; a <= p; ++a)
            for (int b = 0; b <= p; ++b)
                ty.emplace_back(yd[static_cast<size_t>(a)], yd[static_cast<size_t>(b)], my(a, b));
    }
    sp.M_XY.resize(sp.dim_x, sp.dim_y);
    sp.M_XY.setFromTriplets(txy.begin(), txy.end());
    sp.M_X.resize(sp.dim_x, sp.dim_x);
    sp.M_X.setFromTriplets(tx.begin(), tx.end());
    sp.M_Y.resize(sp.dim_y, sp.dim_y);
    sp.M_Y.setFromTriplets(ty.begin(), ty.end());
    return sp;
}

PanelQuadrature make_panel_quadrature(const BoundaryCurve& boundary, int per_panel) {
    const Rule1D& rule = gauss_legendre(per_panel);
    PanelQuadrature pq;
    pq.per_panel = per_panel;
    const int np = static_cast<int>(boundary.panels.size());
    pq.points.reserve(static_cast<size_t>(np * per_panel));
    for (int i = 0; i < np; ++i) {
        const Panel& p = boundary.panels[static_cast<size_t>(i)];
        for (int q = 0; q < per_panel; ++q) {
            double t = rule.points[static_cast<size_t>(q)];
            pq.points.push_back(boundary.point(i, t));
            pq.weights.push_back(rule.weights[static_cast<size_t>(q)] * p.length);
            pq.normals.push_back(p.normal);
            pq.panel_of.push_back(i);
            pq.param.push_back(t);
        }
    }
    return pq;
}

// ---------------------------------------------------------------------------
// operator assembly

namespace {

struct PanelGeo {
    Eigen::Vector2d p0, p1, tang, nrm;
    double len;
};

struct PairBlocks {
    Eigen::MatrixXcd V;  // X(a) x X(b)
    Eigen::MatrixXcd KB; // X(a) x Y(b), kernel d/dnu_y
    Eigen::MatrixXcd KA; // Y(a) x X(b), kernel d/dnu_x
    Eigen::MatrixXcd W;  // Y(a) x Y(b)
};

struct Assembler {
    const BoundaryCurve& bc;
    const BoundarySpaces& sp;
    Cd s;
    int p;
    std::vector<PanelGeo> geo;
    bool capped = false;

    Assembler(const BoundaryCurve& bc_, const BoundarySpaces& sp_, Cd s_)
        : bc(bc_), sp(sp_), s(s_), p(sp_.order) {
        geo.resize(bc.panels.size());
        for (size_t i = 0; i < bc.panels.size(); ++i) {
            geo[i].p0 = bc.points[static_cast<size_t>(bc.panel_vertices[i][0])];
            geo[i].p1 = bc.points[static_cast<size_t>(bc.panel_vertices[i][1])];
            geo[i].tang = bc.panels[i].tangent;
            geo[i].nrm = bc.panels[i].normal;
            geo[i].len = bc.panels[i].length;
        }
    }

    // gauss points per direction for a smooth sub-segment of length l
    int smooth_points(double l) const {
        double osc = std::abs(s) * l / 1.8;
        return std::clamp(static_cast<int>(std::ceil(osc)) + 4, 6, 24);
    }

    // accumulate the four kernel-weighted basis products at one point pair
    inline void accumulate(PairBlocks& blk, const PanelGeo& ga, const PanelGeo& gb, double ta,
                           double tb, double w) {
        Eigen::Vector2d x = ga.p0 + ta * (ga.p1 - ga.p0);
        Eigen::Vector2d y = gb.p0 + tb * (gb.p1 - gb.p0);
        Eigen::Vector2d d = y - x;
        double r = d.norm();
        BesselK01 k01 = bessel_k01(s * r);
        Cd phi = k01.k0 / (2.0 * M_PI);
        Cd k1fac = -s * k01.k1 / (2.0 * M_PI * r);
        double db = d.dot(gb.nrm);
        double da = -d.dot(ga.nrm);
        Cd kb = k1fac * db;
        Cd ka = k1fac * da;

        double xa[4], xb[4], ya[5], yb[5], dya[5], dyb[5];
        x_basis_values(p, ta, xa);
        x_basis_values(p, tb, xb);
        y_basis_values(p, ta, ya);
        y_basis_values(p, tb, yb);
        y_basis_derivs(p, ta, dya);
        y_basis_derivs(p, tb, dyb);

        double nn = ga.nrm.dot(gb.nrm);
        Cd wphi = w * phi;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) blk.V(i, j) += wphi * xa[i] * xb[j];
        Cd wkb = w * kb, wka = w * ka;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j <= p; ++j) blk.KB(i, j) += wkb * xa[i] * yb[j];
        for (int i = 0; i <= p; ++i)
            for (int j = 0; j < p; ++j) blk.KA(i, j) += wka * ya[i] * xb[j];
        Cd s2nn = s * s * nn;
        for (int i = 0; i <= p; ++i)
            for (int j = 0; j <= p; ++j)
                blk.W(i, j) += wphi * (dya[i] * dyb[j] / (ga.len * gb.len) + s2nn * ya[i] * yb[j]);
    }

    void tensor_block(PairBlocks& blk, const PanelGeo& ga, const PanelGeo& gb, double a0,
                      double a1, double b0, double b1, int na, int nb) {
        const Rule1D& ra = gauss_legendre(na);
        const Rule1D& rb = gauss_legendre(nb);
        for (int qa = 0; qa < na; ++qa) {
            double ta = a0 + (a1 - a0) * ra.points[static_cast<size_t>(qa)];
            double wa = (a1 - a0) * ra.weights[static_cast<size_t>(qa)] * ga.len;
            for (int qb = 0; qb < nb; ++qb) {
                double tb = b0 + (b1 - b0) * rb.points[static_cast<size_t>(qb)];
                double wb = (b1 - b0) * rb.weights[static_cast<size_t>(qb)] * gb.len;
                accumulate(blk, ga, gb, ta, tb, wa * wb);
            }
        }
    }

    static double segment_distance(const Eigen::Vector2d& a0, const Eigen::Vector2d& a1,
                                   const Eigen::Vector2d& b0, const Eigen::Vector2d& b1) {
        auto point_seg = [](const Eigen::Vector2d& q, const Eigen::Vector2d& u0,
                            const Eigen::Vector2d& u1) {
            Eigen::Vector2d d = u1 - u0;
            double t = std::clamp((q - u0).dot(d) / d.squaredNorm(), 0.0, 1.0);
            return (q - (u0 + t * d)).norm();
        };
        return std::min(std::min(point_seg(a0, b0, b1), point_seg(a1, b0, b1)),
                        std::min(point_seg(b0, a0, a1), point_seg(b1, a0, a1)));
    }

    void adaptive_block(PairBlocks& blk, const PanelGeo& ga, const PanelGeo& gb, double a0,
                        double a1, double b0, double b1, int depth) {
        Eigen::Vector2d pa0 = ga.p0 + a0 * (ga.p1 - ga.p0), pa1 = ga.p0 + a1 * (ga.p1 - ga.p0);
        Eigen::Vector2d pb0 = gb.p0 + b0 * (gb.p1 - gb.p0), pb1 = gb.p0 + b1 * (gb.p1 - gb.p0);
        double la = (a1 - a0) * ga.len, lb = (b1 - b0) * gb.len;
        double dist = segment_distance(pa0, pa1, pb0, pb1);
        if (dist >= 0.7 * std::max(la, lb) || depth >= 24) {
            if (dist <= 0.0) {
                capped = true;
                return; // touching interiors: invalid geometry, skip
            }
            if (depth >= 24) capped = true;
            int na = smooth_points(la), nb = smooth_points(lb);
            tensor_block(blk, ga, gb, a0, a1, b0, b1, na, nb);
            return;
        }
        double am = 0.5 * (a0 + a1), bm = 0.5 * (b0 + b1);
        adaptive_block(blk, ga, gb, a0, am, b0, bm, depth + 1);
        adaptive_block(blk, ga, gb, a0, am, bm, b1, depth + 1);
        adaptive_block(blk, ga, gb, am, a1, b0, bm, depth + 1);
        adaptive_block(blk, ga, gb, am, a1, bm, b1, depth + 1);
    }

    // ---- coincident panel: reduce to 1D integrals in w = |u-v| ----

    // strip integral of F_i(u) G_j(v) over {|u-v| = w}:
    //   S_ij(w) = int_0^{1-w} [F_i(v+w) G_j(v) + F_i(v) G_j(v+w)] dv
    template <typename FEval, typename GEval>
    void strip_values(double w, int nf, int ng, FEval&& fe, GEval&& ge,
                      Eigen::MatrixXd& out) const {
        out.setZero();
        const Rule1D& rule = gauss_legendre(p + 2);
        double fv[5], gv[5], fv2[5], gv2[5];
        for (int q = 0; q < rule.size(); ++q) {
            double v = (1.0 - w) * rule.points[static_cast<size_t>(q)];
            double ww = (1.0 - w) * rule.weights[static_cast<size_t>(q)];
            fe(v + w, fv);
            ge(v, gv);
            fe(v, fv2);
            ge(v + w, gv2);
            for (int i = 0; i < nf; ++i)
                for (int j = 0; j < ng; ++j)
                    out(i, j) += ww * (fv[i] * gv[j] + fv2[i] * gv2[j]);
        }
    }

    // sum over the 1D rule of kern(L w) S_ij(w), with kern split into a
    // smooth part (regular Gauss) and a log part (log-weighted Gauss)
    template <typename FEval, typename GEval>
    Eigen::MatrixXcd coincident_integral(double len, int nf, int ng, FEval&& fe, GEval&& ge) {
        Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(nf, ng);
        Eigen::MatrixXd stripm(nf, ng);
        if (std::abs(s) * len <= 8.0) {
            const Rule1D& smooth_rule = gauss_legendre(16);
            const Rule1D& log_rule = gauss_log(12);
            const double logl = std::log(len);
            for (int q = 0; q < smooth_rule.size(); ++q) {
                double w = smooth_rule.points[static_cast<size_t>(q)];
                KernelSplit ks = bessel_k0_split(s, len * w);
                Cd kern = (ks.smooth + ks.log_coef * logl) / (2.0 * M_PI);
                strip_values(w, nf, ng, fe, ge, stripm);
                acc += (smooth_rule.weights[static_cast<size_t>(q)] * kern) * stripm;
            }
            for (int q = 0; q < log_rule.size(); ++q) {
                double w = log_rule.points[static_cast<size_t>(q)];
                KernelSplit ks = bessel_k0_split(s, len * w);
                Cd kern = -ks.log_coef / (2.0 * M_PI); // int f ln w = -int f (-ln w)
                strip_values(w, nf, ng, fe, ge, stripm);
                acc += (log_rule.weights[static_cast<size_t>(q)] * kern) * stripm;
            }
        } else {
            // dyadically graded composite Gauss toward w = 0
            double hi = 1.0;
            for (int lev = 0; lev < 22; ++lev) {
                double lo = (lev == 21) ? 0.0 : hi / 2.0;
                int n = std::clamp(static_cast<int>(std::abs(s) * len * (hi - lo) / 1.5) + 4, 4, 20);
                const Rule1D& rule = gauss_legendre(n);
                for (int q = 0; q < n; ++q) {
                    double w = lo + (hi - lo) * rule.points[static_cast<size_t>(q)];
                    if (w <= 0.0) continue;
                    Cd kern = bessel_k0(s * (len * w)) / (2.0 * M_PI);
                    strip_values(w, nf, ng, fe, ge, stripm);
                    acc += (rule.weights[static_cast<size_t>(q)] * (hi - lo) * kern) * stripm;
                }
                hi = lo;
            }
        }
        return acc;
    }

    void coincident_block(PairBlocks& blk, int panel) {
        const PanelGeo& g = geo[static_cast<size_t>(panel)];
        const double L = g.len;
        auto ex = [this](double t, double* v) { x_basis_values(p, t, v); };
        auto ey = [this](double t, double* v) { y_basis_values(p, t, v); };
        auto eyd = [this](double t, double* v) { y_basis_derivs(p, t, v); };
        blk.V += L * L * coincident_integral(L, p, p, ex, ex);
        // W: derivative term (arc derivatives cancel the L^2) + s^2 mass term
        blk.W += coincident_integral(L, p + 1, p + 1, eyd, eyd);
        blk.W += (s * s) * (L * L) * coincident_integral(L, p + 1, p + 1, ey, ey);
        // K and Kt vanish on straight coincident panels
    }

    // ---- adjacent panels sharing one vertex: Duffy + log split ----

    struct MappedPanel {
        const PanelGeo* g;
        Eigen::Vector2d dir; // away from the shared vertex, scaled by length
        bool flip;           // panel parameter t = flip ? 1-u : u
        double t_of(double u) const { return flip ? 1.0 - u : u; }
    };

    void adjacent_block(PairBlocks& blk, int a, int b) {
        const PanelGeo& ga = geo[static_cast<size_t>(a)];
        const PanelGeo& gb = geo[static_cast<size_t>(b)];
        const auto& va = bc.panel_vertices[static_cast<size_t>(a)];
        const auto& vb = bc.panel_vertices[static_cast<size_t>(b)];
        int shared = -1;
        for (int i : {va[0], va[1]})
            for (int j : {vb[0], vb[1]})
                if (i == j) shared = i;
        MappedPanel ma{&ga, Eigen::Vector2d::Zero(), false};
        MappedPanel mb{&gb, Eigen::Vector2d::Zero(), false};
        if (va[0] == shared) {
            ma.dir = ga.p1 - ga.p0;
            ma.flip = false;
        } else {
            ma.dir = ga.p0 - ga.p1;
            ma.flip = true;
        }
        if (vb[0] == shared) {
            mb.dir = gb.p1 - gb.p0;
            mb.flip = false;
        } else {
            mb.dir = gb.p0 - gb.p1;
            mb.flip = true;
        }

        const bool split_ok = std::abs(s) * (ga.len + gb.len) <= 8.0;
        // two Duffy triangles: (u,v) = (t, t q) and (t q, t)
        for (int tri = 0; tri < 2; ++tri) {
            auto uv = [&](double t, double q) {
                return tri == 0 ? std::pair<double, double>{t, t * q}
                                : std::pair<double, double>{t * q, t};
            };
            int nq = smooth_points(std::max(ga.len, gb.len));
            const Rule1D& rq = gauss_legendre(nq);
            if (split_ok) {
                const Rule1D& rt = gauss_legendre(14);
                const Rule1D& rl = gauss_log(12);
                for (int iq = 0; iq < nq; ++iq) {
                    double q = rq.points[static_cast<size_t>(iq)];
                    double wq = rq.weights[static_cast<size_t>(iq)];
                    // r = t * gq with gq = |dir_a - q dir_b| (tri 0) etc.
                    Eigen::Vector2d diff = (tri == 0) ? (ma.dir - q * mb.dir).eval()
                                                      : (q * ma.dir - mb.dir).eval();
                    double gq = diff.norm();
                    double lng = std::log(gq);
                    for (int it = 0; it < rt.size() + rl.size(); ++it) {
                        bool logpart = it >= rt.size();
                        double t = logpart ? rl.points[static_cast<size_t>(it - rt.size())]
                                           : rt.points[static_cast<size_t>(it)];
                        double wt = logpart ? rl.weights[static_cast<size_t>(it - rt.size())]
                                            : rt.weights[static_cast<size_t>(it)];
                        auto [u, v] = uv(t, q);
                        double r = t * gq;
                        if (r <= 0.0) continue;
                        KernelSplit k0s = bessel_k0_split(s, r);
                        KernelSplitK1 k1s = bessel_k1s_split(s, r);
                        // ln r = ln t + ln gq; the log-Gauss handles -ln t
                        Cd phi, k1v;
                        if (!logpart) {
                            phi = (k0s.smooth + k0s.log_coef * lng) / (2.0 * M_PI);
                            k1v = (1.0 / r + k1s.smooth + k1s.log_coef * lng) / (2.0 * M_PI);
                        } else {
                            phi = -k0s.log_coef / (2.0 * M_PI);
                            k1v = -k1s.log_coef / (2.0 * M_PI);
                        }
                        accumulate_adjacent(blk, ma, mb, u, v, t * wt * wq * ga.len * gb.len, phi,
                                            k1v, r, !logpart);
                    }
                }
            } else {
                // graded fallback with direct kernel evaluations
                double hi = 1.0;
                for (int lev = 0; lev < 20; ++lev) {
                    double lo = (lev == 19) ? 0.0 : hi / 2.0;
                    int nt = std::clamp(
                        static_cast<int>(std::abs(s) * std::max(ga.len, gb.len) * (hi - lo) / 1.5) + 4,
                        4, 20);
                    const Rule1D& rt = gauss_legendre(nt);
                    for (int iq = 0; iq < nq; ++iq) {
                        double q = rq.points[static_cast<size_t>(iq)];
                        double wq = rq.weights[static_cast<size_t>(iq)];
                        Eigen::Vector2d diff = (tri == 0) ? (ma.dir - q * mb.dir).eval()
                                                          : (q * ma.dir - mb.dir).eval();
                        double gq = diff.norm();
                        for (int it = 0; it < nt; ++it) {
                            double t = lo + (hi - lo) * rt.points[static_cast<size_t>(it)];
                            if (t <= 0.0) continue;
                            double wt = (hi - lo) * rt.weights[static_cast<size_t>(it)];
                            auto [u, v] = uv(t, q);
                            double r = t * gq;
                            BesselK01 k01 = bessel_k01(s * r);
                            Cd phi = k01.k0 / (2.0 * M_PI);
                            Cd k1v = s * k01.k1 / (2.0 * M_PI);
                            accumulate_adjacent(blk, ma, mb, u, v, t * wt * wq * ga.len * gb.len,
                                                phi, k1v, r, true);
                        }
                    }
                    hi = lo;
                }
            }
        }
    }

    // shared accumulation for adjacent pairs; phi is the single-layer kernel
    // piece and k1v carries s*K1(sr)/(2 pi) (including any split), with
    // `with_rinv` false when the 1/r part is contributed elsewhere.
    inline void accumulate_adjacent(PairBlocks& blk, const MappedPanel& ma, const MappedPanel& mb,
                                    double u, double v, double w, Cd phi, Cd k1v, double r,
                                    bool full_kernel) {
        (void)full_kernel;
        double ta = ma.t_of(u), tb = mb.t_of(v);
        // dir points away from the shared vertex and carries the length scale
        Eigen::Vector2d x = (ma.flip ? ma.g->p1 : ma.g->p0) + u * ma.dir;
        Eigen::Vector2d y = (mb.flip ? mb.g->p1 : mb.g->p0) + v * mb.dir;
        Eigen::Vector2d d = y - x;
        double db = d.dot(mb.g->nrm);
        double da = -d.dot(ma.g->nrm);
        Cd kb = -k1v * db / r;
        Cd ka = -k1v * da / r;

        double xa[4], xb[4], ya[5], yb[5], dya[5], dyb[5];
        x_basis_values(p, ta, xa);
        x_basis_values(p, tb, xb);
        y_basis_values(p, ta, ya);
        y_basis_values(p, tb, yb);
        y_basis_derivs(p, ta, dya);
        y_basis_derivs(p, tb, dyb);
        double nn = ma.g->nrm.dot(mb.g->nrm);
        Cd wphi = w * phi;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) blk.V(i, j) += wphi * xa[i] * xb[j];
        Cd wkb = w * kb, wka = w * ka;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j <= p; ++j) blk.KB(i, j) += wkb * xa[i] * yb[j];
        for (int i = 0; i <= p; ++i)
            for (int j = 0; j < p; ++j) blk.KA(i, j) += wka * ya[i] * xb[j];
        Cd s2nn = s * s * nn;
        for (int i = 0; i <= p; ++i)
            for (int j = 0; j <= p; ++j)
                blk.W(i, j) += wphi * (dya[i] * dyb[j] / (ma.g->len * mb.g->len) + s2nn * ya[i] * yb[j]);
    }
};

} // namespace

LayerOperators assemble_operators(const BoundaryCurve& boundary, const BoundarySpaces& sp,
                                  Cd s) {
    if (!(s.real() > 0.0)) throw NumericalError("assemble_operators: Re s must be positive");
    Assembler as(boundary, sp, s);
    const int p = sp.order;
    const int np = sp.n_panels;

    LayerOperators ops;
    ops.s = s;
    ops.V = Eigen::MatrixXcd::Zero(sp.dim_x, sp.dim_x);
    ops.K = Eigen::MatrixXcd::Zero(sp.dim_x, sp.dim_y);
    ops.Kt = Eigen::MatrixXcd::Zero(sp.dim_y, sp.dim_x);
    ops.W = Eigen::MatrixXcd::Zero(sp.dim_y, sp.dim_y);

    auto shares_vertex = [&](int a, int b) {
        const auto& va = boundary.panel_vertices[static_cast<size_t>(a)];
        const auto& vb = boundary.panel_vertices[static_cast<size_t>(b)];
        return va[0] == vb[0] || va[0] == vb[1] || va[1] == vb[0] || va[1] == vb[1];
    };

    PairBlocks blk;
    for (int a = 0; a < np; ++a) {
        for (int b = a; b < np; ++b) {
            blk.V = Eigen::MatrixXcd::Zero(p, p);
            blk.KB = Eigen::MatrixXcd::Zero(p, p + 1);
            blk.KA = Eigen::MatrixXcd::Zero(p + 1, p);
            blk.W = Eigen::MatrixXcd::Zero(p + 1, p + 1);
            const PanelGeo& ga = as.geo[static_cast<size_t>(a)];
            const PanelGeo& gb = as.geo[static_cast<size_t>(b)];

            if (a == b) {
                as.coincident_block(blk, a);
            } else if (shares_vertex(a, b)) {
                as.adjacent_block(blk, a, b);
            } else {
                double dist = Assembler::segment_distance(ga.p0, ga.p1, gb.p0, gb.p1);
                if (dist >= 0.7 * std::max(ga.len, gb.len)) {
                    as.tensor_block(blk, ga, gb, 0, 1, 0, 1, as.smooth_points(ga.len),
                                    as.smooth_points(gb.len));
                } else {
                    as.adaptive_block(blk, ga, gb, 0, 1, 0, 1, 0);
                }
            }

            const auto& xa = sp.panel_x_dofs[static_cast<size_t>(a)];
            const auto& xb = sp.panel_x_dofs[static_cast<size_t>(b)];
            const auto& yaD = sp.panel_y_dofs[static_cast<size_t>(a)];
            const auto& ybD = sp.panel_y_dofs[static_cast<size_t>(b)];
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < p; ++j) {
                    ops.V(xa[static_cast<size_t>(i)], xb[static_cast<size_t>(j)]) += blk.V(i, j);
                    if (a != b)
                        ops.V(xb[static_cast<size_t>(j)], xa[static_cast<size_t>(i)]) += blk.V(i, j);
                }
            for (int i = 0; i < p; ++i)
                for (int j = 0; j <= p; ++j) {
                    ops.K(xa[static_cast<size_t>(i)], ybD[static_cast<size_t>(j)]) += blk.KB(i, j);
                    if (a != b)
                        ops.Kt(ybD[static_cast<size_t>(j)], xa[static_cast<size_t>(i)]) += blk.KB(i, j);
                }
            for (int i = 0; i <= p; ++i)
                for (int j = 0; j < p; ++j) {
                    ops.Kt(yaD[static_cast<size_t>(i)], xb[static_cast<size_t>(j)]) += blk.KA(i, j);
                    if (a != b)
                        ops.K(xb[static_cast<size_t>(j)], yaD[static_cast<size_t>(i)]) += blk.KA(i, j);
                }
            for (int i = 0; i <= p; ++i)
                for (int j = 0; j <= p; ++j) {
                    ops.W(yaD[static_cast<size_t>(i)], ybD[static_cast<size_t>(j)]) += blk.W(i, j);
                    if (a != b)
                        ops.W(ybD[static_cast<size_t>(j)], yaD[static_cast<size_t>(i)]) += blk.W(i, j);
                }
        }
    }
    ops.refinement_capped = as.capped;
    return ops;
}

// ---------------------------------------------------------------------------
// potential evaluation

namespace {

struct PotentialAccum {
    Cd single = 0.0, dbl = 0.0;
};

void eval_panel(const Eigen::Vector2d& z, const Eigen::Vector2d& p0, const Eigen::Vector2d& p1,
                const Eigen::Vector2d& nrm, double len, Cd s, int order,
                const Eigen::VectorXcd& lam_loc, const Eigen::VectorXcd& phi_loc, double t0,
                double t1, int depth, PotentialAccum& acc) {
    Eigen::Vector2d q0 = p0 + t0 * (p1 - p0), q1 = p0 + t1 * (p1 - p0);
    double sub = (t1 - t0) * len;
    Eigen::Vector2d d = q1 - q0;
    double tproj = std::clamp((z - q0).dot(d) / d.squaredNorm(), 0.0, 1.0);
    double dist = (z - (q0 + tproj * d)).norm();
    if (dist < 1.2 * sub && depth < 26) {
        double tm = 0.5 * (t0 + t1);
        eval_panel(z, p0, p1, nrm, len, s, order, lam_loc, phi_loc, t0, tm, depth + 1, acc);
        eval_panel(z, p0, p1, nrm, len, s, order, lam_loc, phi_loc, tm, t1, depth + 1, acc);
        return;
    }
    if (dist < 1e-12) throw NumericalError("eval_potentials: point on the boundary");
    int n = std::clamp(static_cast<int>(std::abs(s) * sub / 1.8) + 6, 6, 24);
    const Rule1D& rule = gauss_legendre(n);
    double xv[4], yv[5];
    for (int q = 0; q < n; ++q) {
        double t = t0 + (t1 - t0) * rule.points[static_cast<size_t>(q)];
        double w = (t1 - t0) * rule.weights[static_cast<size_t>(q)] * len;
        Eigen::Vector2d y = p0 + t * (p1 - p0);
        double r = (z - y).norm();
        BesselK01 k01 = bessel_k01(s * r);
        Cd phi_kern = k01.k0 / (2.0 * M_PI);
        Cd dl_kern = -s * k01.k1 / (2.0 * M_PI * r) * (y - z).dot(nrm);
        x_basis_values(order, t, xv);
        y_basis_values(order, t, yv);
        Cd lam_val = 0.0, phi_val = 0.0;
        for (int i = 0; i < order; ++i) lam_val += lam_loc(i) * xv[i];
        for (int i = 0; i <= order; ++i) phi_val += phi_loc(i) * yv[i];
        acc.single += w * phi_kern * lam_val;
        acc.dbl += w * dl_kern * phi_val;
    }
}

} // namespace

Eigen::VectorXcd eval_potentials(const BoundaryCurve& boundary, const BoundarySpaces& sp, Cd s,
                                 const Eigen::VectorXcd& lambda, const Eigen::VectorXcd& phi,
                                 std::span<const Eigen::Vector2d> points) {
    if (lambda.size() != sp.dim_x || phi.size() != sp.dim_y)
        throw NumericalError("eval_potentials: density size mismatch");
    const int p = sp.order;
    Eigen::VectorXcd out(static_cast<Eigen::Index>(points.size()));
    for (size_t ip = 0; ip < points.size(); ++ip) {
        PotentialAccum acc;
        for (int panel = 0; panel < sp.n_panels; ++panel) {
            const auto& pv = boundary.panel_vertices[static_cast<size_t>(panel)];
            Eigen::Vector2d p0 = boundary.points[static_cast<size_t>(pv[0])];
            Eigen::Vector2d p1 = boundary.points[static_cast<size_t>(pv[1])];
            Eigen::VectorXcd lam_loc(p), phi_loc(p + 1);
            for (int i = 0; i < p; ++i)
                lam_loc(i) = lambda(sp.panel_x_dofs[static_cast<size_t>(panel)][static_cast<size_t>(i)]);
            for (int i = 0; i <= p; ++i)
                phi_loc(i) = phi(sp.panel_y_dofs[static_cast<size_t>(panel)][static_cast<size_t>(i)]);
            eval_panel(points[ip], p0, p1, boundary.panels[static_cast<size_t>(panel)].normal,
                       boundary.panels[static_cast<size_t>(panel)].length, s, p, lam_loc, phi_loc,
                       0.0, 1.0, 0, acc);
        }
        out(static_cast<Eigen::Index>(ip)) = acc.single - acc.dbl;
    }
    return out;
}

void dump_coo_complex(const Eigen::MatrixXcd& m, const std::string& path) {
    std::ofstream out(path);
    out << m.rows() << " " << m.cols() << "\n";
    char buf[128];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%ld %ld %.17g %.17g\n", static_cast<long>(i),
                          static_cast<long>(j), m(i, j).real(), m(i, j).imag());
            out << buf;
        }
    }
}

} // namespace piezo
