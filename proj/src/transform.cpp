#include "slipfsi/transform.hpp"

#include "slipfsi/stokes.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace slipfsi {

namespace {

constexpr int kEps[3][3][3] = {{{0, 0, 0}, {0, 0, 1}, {0, -1, 0}},
                               {{0, 0, -1}, {0, 0, 0}, {1, 0, 0}},
                               {{0, 1, 0}, {-1, 0, 0}, {0, 0, 0}}};

using Stages = std::array<SpatialMotion, 4>;

/// RK4 substeps of h' = Q l~, Q' = (Q omega~) x Q over one macro step with
/// body velocities linear between (lA, wA) and (lB, wB). Returns the stage
/// motions seen by the point equations.
std::vector<Stages> rigid_stages(const Vec3& h0, const Mat3& Q0, const Vec3& lA, const Vec3& wA, const Vec3& lB,
                                 const Vec3& wB, double dt, int ns, Vec3& h_end, Mat3& Q_end) {
    std::vector<Stages> out(ns);
    Vec3 h = h0;
    Mat3 Q = Q0;
    const double tau = dt / ns;
    for (int s = 0; s < ns; ++s) {
        const double th0 = static_cast<double>(s) / ns;
        const double dth = 1.0 / ns;
        const double ths[4] = {th0, th0 + 0.5 * dth, th0 + 0.5 * dth, th0 + dth};
        Vec3 kh[4];
        Mat3 kQ[4];
        Vec3 hs = h;
        Mat3 Qs = Q;
        for (int k = 0; k < 4; ++k) {
            if (k > 0) {
                const double c = (k == 3 ? 1.0 : 0.5) * tau;
                hs = h + c * kh[k - 1];
                Qs = Q + c * kQ[k - 1];
            }
            SpatialMotion& m = out[s][k];
            m.h = hs;
            m.l = Qs * ((1.0 - ths[k]) * lA + ths[k] * lB);
            m.omega = Qs * ((1.0 - ths[k]) * wA + ths[k] * wB);
            kh[k] = m.l;
            kQ[k] = skew(m.omega) * Qs;
        }
        h += tau / 6.0 * (kh[0] + 2.0 * kh[1] + 2.0 * kh[2] + kh[3]);
        Q += tau / 6.0 * (kQ[0] + 2.0 * kQ[1] + 2.0 * kQ[2] + kQ[3]);
    }
    h_end = h;
    Q_end = Q;
    return out;
}

}  // namespace

CutoffPsi::CutoffPsi(const Sphere& outer, double beta) : outer_(outer), beta_(beta) {
    if (!(beta > 0.0)) throw GeometryError("cut-off: beta must be positive");
}

std::array<double, 4> CutoffPsi::smoothstep(double t) {
    if (t <= 0.0) return {0.0, 0.0, 0.0, 0.0};
    if (t >= 1.0) return {1.0, 0.0, 0.0, 0.0};
    const double u = 1.0 - t;
    const double t2 = t * t;
    return {t2 * t2 * (35.0 - 84.0 * t + 70.0 * t2 - 20.0 * t2 * t), 140.0 * t2 * t * u * u * u,
            420.0 * t2 * u * u * (1.0 - 2.0 * t), 840.0 * t * u * (5.0 * t2 - 5.0 * t + 1.0)};
}

double CutoffPsi::value(const Vec3& x) const {
    const double d = outer_.radius - (x - outer_.center).norm();
    return smoothstep((d - outer_margin()) / outer_margin())[0];
}

PsiJet CutoffPsi::jet(const Vec3& x, int order) const {
    PsiJet j;
    const Vec3 r = x - outer_.center;
    const double rho = r.norm();
    const double d = outer_.radius - rho;
    const double w = outer_margin();
    const double tau = (d - w) / w;
    if (tau >= 1.0) {
        j.value = 1.0;
        return j;
    }
    if (tau <= 0.0) return j;
    const auto s = smoothstep(tau);
    j.value = s[0];
    if (order < 1) return j;
    const double c1 = 1.0 / w;
    const Vec3 e = r / rho;
    const Vec3 dd = -e;
    const Mat3 d2 = -(Mat3::Identity() - e * e.transpose()) / rho;
    const double f1 = s[1] * c1, f2 = s[2] * c1 * c1, f3 = s[3] * c1 * c1 * c1;
    j.grad = f1 * dd;
    if (order < 2) return j;
    j.hess = f2 * dd * dd.transpose() + f1 * d2;
    if (order < 3) return j;
    const double r3 = rho * rho * rho, r5 = r3 * rho * rho;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c) {
                const double d3 = ((a == b) * r[c] + (a == c) * r[b] + (b == c) * r[a]) / r3 -
                                  3.0 * r[a] * r[b] * r[c] / r5;  // third derivative of d
                j.third[a](b, c) = f3 * dd[a] * dd[b] * dd[c] +
                                   f2 * (d2(a, b) * dd[c] + d2(a, c) * dd[b] + d2(b, c) * dd[a]) + f1 * d3;
            }
    return j;
}

Vec3 eval_w(const SpatialMotion& m, const Vec3& x) {
    const Vec3 r = x - m.h;
    return 0.5 * m.l.cross(r) - 0.5 * r.squaredNorm() * m.omega;
}

LambdaJet eval_lambda(const SpatialMotion& m, const Vec3& x, const CutoffPsi& psi, int order) {
    LambdaJet L;
    const PsiJet p = psi.jet(x, order + 1);
    const Vec3 r = x - m.h;
    if (p.value == 0.0) return L;
    if (p.value == 1.0 && p.grad.isZero(0.0)) {
        L.value = m.l + m.omega.cross(r);
        L.grad = skew(m.omega);
        return L;
    }
    // F = psi w, Lambda_i = eps_ijk d_j F_k.
    const Vec3 w = eval_w(m, x);
    Mat3 W1;  // W1(k, j) = d_j w_k
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j) {
            double v = -r[j] * m.omega[k];
            for (int a = 0; a < 3; ++a) v += 0.5 * kEps[k][a][j] * m.l[a];
            W1(k, j) = v;
        }
    auto W2 = [&](int k, int j, int n) { return j == n ? -m.omega[k] : 0.0; };

    Mat3 dF;  // dF(k, j) = d_j F_k
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j) dF(k, j) = p.grad[j] * w[k] + p.value * W1(k, j);
    for (int i = 0; i < 3; ++i) {
        double v = 0.0;
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) v += kEps[i][j][k] * dF(k, j);
        L.value[i] = v;
    }
    if (order < 1) return L;

    for (int i = 0; i < 3; ++i)
        for (int n = 0; n < 3; ++n) {
            double v = 0.0;
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) {
                    if (kEps[i][j][k] == 0) continue;
                    const double d2F = p.hess(j, n) * w[k] + p.grad[j] * W1(k, n) + p.grad[n] * W1(k, j) +
                                       p.value * W2(k, j, n);
                    v += kEps[i][j][k] * d2F;
                }
            L.grad(i, n) = v;
        }
    if (order < 2) return L;

    for (int i = 0; i < 3; ++i)
        for (int n = 0; n < 3; ++n)
            for (int q = n; q < 3; ++q) {
                double v = 0.0;
                for (int j = 0; j < 3; ++j)
                    for (int k = 0; k < 3; ++k) {
                        if (kEps[i][j][k] == 0) continue;
                        const double d3F = p.third[j](n, q) * w[k] + p.hess(j, n) * W1(k, q) +
                                           p.hess(j, q) * W1(k, n) + p.hess(n, q) * W1(k, j) +
                                           p.grad[j] * W2(k, n, q) + p.grad[n] * W2(k, j, q) +
                                           p.grad[q] * W2(k, j, n);
                        v += kEps[i][j][k] * d3F;
                    }
                L.hess[i](n, q) = v;
                L.hess[i](q, n) = v;
            }
    return L;
}

FlowMap::FlowMap(const DomainConfig& domain, std::vector<Vec3> points, const Vec3& l0_body,
                 const Vec3& omega0_body, const FlowOptions& opt)
    : psi_(domain.outer, domain.beta), opt_(opt), center_(domain.solid.center), points_(std::move(points)) {
    t_.push_back(0.0);
    h_.push_back(center_);
    Q_.push_back(Mat3::Identity());
    lb_.push_back(l0_body);
    wb_.push_back(omega0_body);
    X_.push_back(points_);
    J_.emplace_back(points_.size(), Mat3::Identity());
    if (opt_.second_order) dJ_.emplace_back(points_.size(), Tensor3{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()});
}

FlowMap FlowMap::build(const DomainConfig& domain, std::vector<Vec3> points, const BodyHistory& history,
                       const FlowOptions& opt) {
    const size_t n = history.t.size();
    if (n == 0 || history.l_body.size() != n || history.omega_body.size() != n)
        throw std::invalid_argument("FlowMap::build: inconsistent history");
    FlowMap map(domain, std::move(points), history.l_body[0], history.omega_body[0], opt);
    map.t_[0] = history.t[0];
    for (size_t k = 1; k < n; ++k)
        map.advance(history.l_body[k], history.omega_body[k], history.t[k] - history.t[k - 1]);
    return map;
}

SpatialMotion FlowMap::motion(int n) const {
    SpatialMotion m;
    m.h = h_[n];
    m.l = Q_[n] * lb_[n];
    m.omega = Q_[n] * wb_[n];
    return m;
}

const Tensor3& FlowMap::dJ(int n, int p) const {
    if (!opt_.second_order) throw std::logic_error("FlowMap: second derivatives were not tracked");
    return dJ_[n][p];
}

Vec3 FlowMap::velocity(int n, int p) const { return eval_lambda(motion(n), X_[n][p], psi_, 0).value; }

void FlowMap::step_points(const std::vector<Stages>& subs, double tau, PointJet& p, bool second) const {
    const int order = second ? 2 : 1;
    for (const Stages& st : subs) {
        Vec3 kX[4];
        Mat3 kJ[4];
        Tensor3 kD[4];
        PointJet s = p;
        for (int k = 0; k < 4; ++k) {
            if (k > 0) {
                const double c = (k == 3 ? 1.0 : 0.5) * tau;
                s.X = p.X + c * kX[k - 1];
                s.J = p.J + c * kJ[k - 1];
                if (second)
                    for (int q = 0; q < 3; ++q) s.dJ[q] = p.dJ[q] + c * kD[k - 1][q];
            }
            const LambdaJet L = eval_lambda(st[k], s.X, psi_, order);
            kX[k] = L.value;
            kJ[k] = L.grad * s.J;
            if (second) {
                Mat3 T[3];
                for (int i = 0; i < 3; ++i) T[i] = s.J.transpose() * L.hess[i] * s.J;
                for (int q = 0; q < 3; ++q) {
                    Mat3 d = L.grad * s.dJ[q];
                    for (int i = 0; i < 3; ++i)
                        for (int j = 0; j < 3; ++j) d(i, j) += T[i](j, q);
                    kD[k][q] = d;
                }
            }
        }
        p.X += tau / 6.0 * (kX[0] + 2.0 * kX[1] + 2.0 * kX[2] + kX[3]);
        p.J += tau / 6.0 * (kJ[0] + 2.0 * kJ[1] + 2.0 * kJ[2] + kJ[3]);
        if (second)
            for (int q = 0; q < 3; ++q) p.dJ[q] += tau / 6.0 * (kD[0][q] + 2.0 * kD[1][q] + 2.0 * kD[2][q] + kD[3][q]);
    }
}

void FlowMap::advance(const Vec3& l1_body, const Vec3& omega1_body, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("advance_flow: dt must be positive");
    const int n = levels() - 1;
    const int np = num_points();
    int ns = next_ns_;
    std::vector<PointJet> next(np);
    Vec3 h1;
    Mat3 Q1;
    double err = 0.0;
    for (;;) {
        const std::vector<Stages> subs =
            rigid_stages(h_[n], Q_[n], lb_[n], wb_[n], l1_body, omega1_body, dt, ns, h1, Q1);
        err = 0.0;
        for (int p = 0; p < np; ++p) {
            PointJet pj;
            pj.X = X_[n][p];
            pj.J = J_[n][p];
            if (opt_.second_order) pj.dJ = dJ_[n][p];
            step_points(subs, dt / ns, pj, opt_.second_order);
            err = std::max(err, std::abs(pj.J.determinant() - J_[n][p].determinant()));
            next[p] = pj;
        }
        if (err <= opt_.det_tol) break;
        if (dt / (2.0 * ns) < opt_.dt_min) {
            std::ostringstream msg;
            msg << "advance_flow: det J_X drift " << err << " with substep " << dt / ns << " below dt_min";
            throw SolverError(msg.str());
        }
        ns *= 2;
    }
    reorthonormalize(Q1, opt_.reortho_tol);
    t_.push_back(t_[n] + dt);
    h_.push_back(h1);
    Q_.push_back(Q1);
    lb_.push_back(l1_body);
    wb_.push_back(omega1_body);
    substeps_.push_back(ns);
    std::vector<Vec3> X(np);
    std::vector<Mat3> J(np);
    std::vector<Tensor3> D;
    if (opt_.second_order) D.resize(np);
    for (int p = 0; p < np; ++p) {
        X[p] = next[p].X;
        J[p] = next[p].J;
        if (opt_.second_order) D[p] = next[p].dJ;
    }
    X_.push_back(std::move(X));
    J_.push_back(std::move(J));
    if (opt_.second_order) dJ_.push_back(std::move(D));
    next_ns_ = (err < opt_.det_tol / 64.0 && ns > 1) ? ns / 2 : ns;
}

std::vector<FlowMap::Stages> FlowMap::replay_stages(int n) const {
    Vec3 h1;
    Mat3 Q1;
    return rigid_stages(h_[n], Q_[n], lb_[n], wb_[n], lb_[n + 1], wb_[n + 1], t_[n + 1] - t_[n], substeps_[n], h1,
                        Q1);
}

PointJet FlowMap::trace(const Vec3& y, int n, bool second_order) const {
    PointJet p;
    p.X = y;
    for (int k = 0; k < n; ++k) {
        const double dt = t_[k + 1] - t_[k];
        step_points(replay_stages(k), dt / substeps_[k], p, second_order);
    }
    return p;
}

Vec3 FlowMap::invert(const Vec3& x, int n, double tol, int max_iter) const {
    std::vector<Vec3> guesses = {x, center_ + Q_[n].transpose() * (x - h_[n])};
    // Linearization about the nearest tracked point of the deformed configuration.
    int nearest = -1;
    double dmin = std::numeric_limits<double>::infinity();
    for (int p = 0; p < num_points(); ++p) {
        const double d = (X_[n][p] - x).squaredNorm();
        if (d < dmin) {
            dmin = d;
            nearest = p;
        }
    }
    if (nearest >= 0) guesses.push_back(points_[nearest] + J_[n][nearest].lu().solve(x - X_[n][nearest]));
    Vec3 y = guesses[0];
    PointJet pj = trace(y, n, false);
    double res = (pj.X - x).norm();
    for (size_t g = 1; g < guesses.size() && res > 0.0; ++g) {
        const PointJet alt = trace(guesses[g], n, false);
        const double r2 = (alt.X - x).norm();
        if (r2 < res) {
            y = guesses[g];
            pj = alt;
            res = r2;
        }
    }
    for (int it = 0; it < max_iter && res > tol; ++it) {
        const Vec3 step = pj.J.lu().solve(pj.X - x);
        double a = 1.0;
        bool improved = false;
        for (int b = 0; b < 30; ++b, a *= 0.5) {
            const Vec3 yt = y - a * step;
            const PointJet pt = trace(yt, n, false);
            const double rt = (pt.X - x).norm();
            if (rt < res) {
                y = yt;
                pj = pt;
                res = rt;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    if (!(res <= tol)) {
        std::ostringstream msg;
        msg << "invert_flow: Newton did not converge, residual " << res;
        throw SolverError(msg.str());
    }
    return y;
}

FlowJacobians FlowMap::jacobians(const Vec3& y, int n) const {
    const PointJet p = trace(y, n, true);
    FlowJacobians out;
    out.JX = p.J;
    out.det = p.J.determinant();
    if (!(std::abs(out.det) > 1e-12)) throw SolverError("jacobians: singular J_X");
    out.JY = p.J.inverse();
    // dJ_Y/dx_m = -J_Y (dJ_X/dy_k) J_Y (J_Y)_km
    Tensor3 G;
    for (int k = 0; k < 3; ++k) G[k] = -out.JY * p.dJ[k] * out.JY;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int m = 0; m < 3; ++m) {
                double v = 0.0;
                for (int k = 0; k < 3; ++k) v += G[k](i, j) * out.JY(k, m);
                out.d2Y[i](j, m) = v;
            }
    return out;
}

double FlowMap::max_det_error() const {
    double e = 0.0;
    for (const auto& lvl : J_)
        for (const Mat3& J : lvl) e = std::max(e, std::abs(J.determinant() - 1.0));
    return e;
}

std::pair<VecX, VecX> pullback_fields(const FluidSpace& s, const FlowMap& map, int n,
                                      const std::function<Vec3(const Vec3&)>& u,
                                      const std::function<double(const Vec3&)>& pi) {
    if (map.num_points() != s.nv()) throw std::invalid_argument("pullback_fields: map does not track the mesh vertices");
    VecX ur = VecX::Zero(s.raw_size());
    VecX pr(s.nv());
    const Mat3& Q = map.Q(n);
    for (int v = 0; v < s.nv(); ++v) {
        const Vec3& x = map.X(n, v);
        ur.segment<3>(s.raw_vertex(v, 0)) = Q.transpose() * u(x);
        pr[v] = pi(x);
    }
    return {ur, pr};
}

SpatialSnapshot pushforward_fields(const FluidSpace& s, const FlowMap& map, int n, const VecX& u_raw,
                                   const VecX& pi) {
    if (map.num_points() != s.nv()) throw std::invalid_argument("pushforward_fields: map does not track the mesh vertices");
    SpatialSnapshot out;
    out.x.resize(s.nv());
    out.u.resize(s.nv());
    out.p = pi;
    const Mat3& Q = map.Q(n);
    for (int v = 0; v < s.nv(); ++v) {
        out.x[v] = map.X(n, v);
        out.u[v] = Q * u_raw.segment<3>(s.raw_vertex(v, 0));
    }
    return out;
}

TetLocation locate_point(const FluidSpace& s, const Vec3& y, double tol) {
    TetLocation best;
    double best_min = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < s.nt(); ++t) {
        const TetGeom& g = s.geom(t);
        const Vec3 b = g.Jm.inverse() * (y - g.x0);
        const std::array<double, 4> lam = {1.0 - b.sum(), b[0], b[1], b[2]};
        const double mn = std::min(std::min(lam[0], lam[1]), std::min(lam[2], lam[3]));
        if (mn > best_min) {
            best_min = mn;
            best.tet = t;
            best.lambda = lam;
            if (mn >= -tol) break;
        }
    }
    if (best_min < -1e-8) best.tet = -1;
    return best;
}

Vec3 pushforward_eval(const FluidSpace& s, const FlowMap& map, int n, const VecX& u_raw, const Vec3& x) {
    const Vec3 y = map.invert(x, n);
    const TetLocation loc = locate_point(s, y);
    if (loc.tet < 0) throw std::invalid_argument("pushforward_eval: point maps outside the reference mesh");
    return map.Q(n) * s.eval(u_raw, loc.tet, loc.lambda);
}

}  // namespace slipfsi
