#include "slipfsi/stokes.hpp"

#include "slipfsi/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace slipfsi {

namespace {

using Trip = Eigen::Triplet<double>;

constexpr int kQuad = 6;

struct RefTensors {
    double C[5][5][4][4] = {};  // int_ref c_ak c_bm
    double M[5][5] = {};        // int_ref phi_a phi_b
    double I[5] = {};           // int_ref phi_a
};

double coef(int a, int k, const std::array<double, 4>& l) {
    if (a < 4) return a == k ? 1.0 : 0.0;
    double p = 256.0;
    for (int j = 0; j < 4; ++j)
        if (j != k) p *= l[j];
    return p;
}

const RefTensors& ref_tensors() {
    static const RefTensors R = [] {
        RefTensors r;
        const TetRule& q = tet_rule(kQuad);
        for (size_t n = 0; n < q.w.size(); ++n) {
            const auto l = barycentric_from_ref(q.xi[n]);
            const auto phi = mini_values(l);
            double c[5][4];
            for (int a = 0; a < 5; ++a)
                for (int k = 0; k < 4; ++k) c[a][k] = coef(a, k, l);
            for (int a = 0; a < 5; ++a) {
                r.I[a] += q.w[n] * phi[a];
                for (int b = 0; b < 5; ++b) {
                    r.M[a][b] += q.w[n] * phi[a] * phi[b];
                    for (int k = 0; k < 4; ++k)
                        for (int m = 0; m < 4; ++m) r.C[a][b][k][m] += q.w[n] * c[a][k] * c[b][m];
                }
            }
        }
        return r;
    }();
    return R;
}

std::array<int, 3> sorted3(std::array<int, 3> a) {
    std::sort(a.begin(), a.end());
    return a;
}

Vec3 facet_area_normal(const Mesh& m, const Facet& f) {
    return 0.5 * (m.x[f.v[1]] - m.x[f.v[0]]).cross(m.x[f.v[2]] - m.x[f.v[0]]);
}

}  // namespace

FluidSpace::FluidSpace(const DomainConfig& domain, bool analytic_normals)
    : domain_(std::make_shared<DomainConfig>(domain)) {
    const Mesh& m = mesh();
    nv_ = m.num_vertices();
    nt_ = m.num_tets();
    kinds_ = m.vertex_kinds();

    geom_.resize(nt_);
    for (int t = 0; t < nt_; ++t) {
        const auto& tv = m.tets[t];
        TetGeom& g = geom_[t];
        g.x0 = m.x[tv[0]];
        for (int k = 0; k < 3; ++k) g.Jm.col(k) = m.x[tv[k + 1]] - g.x0;
        g.vol = g.Jm.determinant() / 6.0;
        if (!(g.vol > 0.0)) {
            std::ostringstream os;
            os << "inverted or degenerate element " << t << " (volume " << g.vol << ")";
            throw GeometryError(os.str());
        }
        const Mat3 inv = g.Jm.inverse();
        for (int k = 0; k < 3; ++k) g.glam[k + 1] = inv.row(k).transpose();
        g.glam[0] = -(g.glam[1] + g.glam[2] + g.glam[3]);
    }

    std::map<std::array<int, 3>, int> face_owner;
    for (int t = 0; t < nt_; ++t)
        for (int k = 0; k < 4; ++k) {
            std::array<int, 3> f;
            int n = 0;
            for (int j = 0; j < 4; ++j)
                if (j != k) f[n++] = m.tets[t][j];
            face_owner[sorted3(f)] = t;
        }
    facet_tet_.resize(m.facets.size());
    bweight_.assign(nv_, 0.0);
    std::vector<Vec3> avg(nv_, Vec3::Zero());
    for (size_t f = 0; f < m.facets.size(); ++f) {
        const auto it = face_owner.find(sorted3(m.facets[f].v));
        if (it == face_owner.end()) throw GeometryError("boundary facet " + std::to_string(f) + " has no owning tet");
        facet_tet_[f] = it->second;
        const Vec3 an = facet_area_normal(m, m.facets[f]);
        for (int v : m.facets[f].v) {
            bweight_[v] += an.norm() / 3.0;
            avg[v] += an;
        }
    }

    solid_index_.assign(nv_, -1);
    normal_.assign(nv_, Vec3::Zero());
    t1_.assign(nv_, Vec3::Zero());
    t2_.assign(nv_, Vec3::Zero());
    for (int v = 0; v < nv_; ++v) {
        if (kinds_[v] != VertexKind::Solid) continue;
        solid_index_[v] = static_cast<int>(solid_.size());
        solid_.push_back(v);
        Vec3 n = analytic_normals ? Vec3(-(m.x[v] - domain_->solid.center)) : avg[v];
        n.normalize();
        normal_[v] = n;
        int axis = 0;
        for (int k = 1; k < 3; ++k)
            if (std::abs(n[k]) < std::abs(n[axis])) axis = k;
        Vec3 a = Vec3::Unit(axis);
        t1_[v] = (a - a.dot(n) * n).normalized();
        t2_[v] = n.cross(t1_[v]);
    }

    free_vertex_.assign(nv_, -1);
    int next = 0;
    for (int v = 0; v < nv_; ++v) {
        if (kinds_[v] == VertexKind::Outer) continue;
        free_vertex_[v] = next;
        next += kinds_[v] == VertexKind::Solid ? 2 : 3;
    }
    free_bubble_ = next;
    nfree_ = next + 3 * nt_;

    std::vector<Trip> trip;
    trip.reserve(3 * nv_ + 3 * nt_ + 27 * solid_.size());
    for (int v = 0; v < nv_; ++v) {
        const int f = free_vertex_[v];
        if (kinds_[v] == VertexKind::Interior) {
            for (int c = 0; c < 3; ++c) trip.emplace_back(raw_vertex(v, c), f + c, 1.0);
        } else if (kinds_[v] == VertexKind::Solid) {
            const Vec6 N = normal_row(v);
            for (int c = 0; c < 3; ++c) {
                trip.emplace_back(raw_vertex(v, c), f, t1_[v][c]);
                trip.emplace_back(raw_vertex(v, c), f + 1, t2_[v][c]);
                for (int k = 0; k < 6; ++k)
                    if (N[k] != 0.0) trip.emplace_back(raw_vertex(v, c), nfree_ + k, normal_[v][c] * N[k]);
            }
        }
    }
    for (int t = 0; t < nt_; ++t)
        for (int c = 0; c < 3; ++c) trip.emplace_back(raw_bubble(t, c), free_bubble(t) + c, 1.0);
    T_.resize(raw_size(), nz());
    T_.setFromTriplets(trip.begin(), trip.end());
    T_.makeCompressed();
}

Vec6 FluidSpace::normal_row(int v) const {
    Vec6 N;
    N.head<3>() = normal_[v];
    N.tail<3>() = lever(v).cross(normal_[v]);
    return N;
}

Eigen::Matrix<double, 3, 6> FluidSpace::rigid_map(int v) const {
    Eigen::Matrix<double, 3, 6> L;
    L.leftCols<3>() = Mat3::Identity();
    L.rightCols<3>() = -skew(lever(v));
    return L;
}

std::array<double, 4> FluidSpace::barycentric(int t, const Vec3& x) const {
    const TetGeom& g = geom_[t];
    const Vec3 r = g.Jm.inverse() * (x - g.x0);
    return {1.0 - r.sum(), r[0], r[1], r[2]};
}

VecX FluidSpace::free_from_raw(const VecX& raw, double tol) const {
    if (raw.size() != raw_size()) throw std::invalid_argument("free_from_raw: size mismatch");
    const double scale = std::max(raw.cwiseAbs().maxCoeff(), 1e-300);
    VecX z = VecX::Zero(nfree_);
    for (int v = 0; v < nv_; ++v) {
        const Vec3 u = raw.segment<3>(3 * v);
        const int f = free_vertex_[v];
        switch (kinds_[v]) {
            case VertexKind::Outer:
                if (u.norm() > tol * scale)
                    throw std::invalid_argument("field does not vanish at OUTER vertex " + std::to_string(v));
                break;
            case VertexKind::Solid:
                if (std::abs(u.dot(normal_[v])) > tol * scale)
                    throw std::invalid_argument("field has a normal trace at SOLID vertex " + std::to_string(v));
                z[f] = u.dot(t1_[v]);
                z[f + 1] = u.dot(t2_[v]);
                break;
            case VertexKind::Interior:
                z.segment<3>(f) = u;
                break;
        }
    }
    z.tail(3 * nt_) = raw.tail(3 * nt_);
    return z;
}

VecX FluidSpace::rigid_raw(const Vec6& xi) const {
    VecX raw = VecX::Zero(raw_size());
    for (int v = 0; v < nv_; ++v) raw.segment<3>(3 * v) = rigid_map(v) * xi;
    return raw;
}

Vec3 FluidSpace::eval(const VecX& raw, int t, const std::array<double, 4>& l) const {
    const auto phi = mini_values(l);
    Vec3 u = Vec3::Zero();
    for (int a = 0; a < 5; ++a)
        for (int c = 0; c < 3; ++c) u[c] += phi[a] * raw[raw_local(t, a, c)];
    return u;
}

Mat3 FluidSpace::grad(const VecX& raw, int t, const std::array<double, 4>& l) const {
    const auto g = mini_gradients(l, geom_[t].glam);
    Mat3 G = Mat3::Zero();
    for (int a = 0; a < 5; ++a) {
        Vec3 ua(raw[raw_local(t, a, 0)], raw[raw_local(t, a, 1)], raw[raw_local(t, a, 2)]);
        G += ua * g[a].transpose();
    }
    return G;
}

SpMat StokesBlocks::free_block(const SpMat& Z) const { return Z.topLeftCorner(nf(), nf()); }

SpMat StokesBlocks::B_free() const { return B.leftCols(nf()); }

StokesBlocks assemble_stokes(std::shared_ptr<const FluidSpace> sp, double mu,
                             const std::optional<std::vector<double>>& alpha_override) {
    if (!(mu > 0.0)) throw std::invalid_argument("assemble_stokes: viscosity must be positive");
    const FluidSpace& s = *sp;
    const Mesh& m = s.mesh();
    const std::vector<double>& alpha = alpha_override ? *alpha_override : s.domain().alpha;
    if (static_cast<int>(alpha.size()) != s.nv()) throw std::invalid_argument("assemble_stokes: alpha size mismatch");
    const RefTensors& R = ref_tensors();

    StokesBlocks b;
    b.space = sp;
    b.mu = mu;
    std::vector<Trip> tm, ta, tb, tl;
    tm.reserve(s.nt() * 75);
    ta.reserve(s.nt() * 225);
    tb.reserve(s.nt() * 60);
    tl.reserve(s.nt() * 16);
    b.gauge = VecX::Zero(s.np());

    for (int t = 0; t < s.nt(); ++t) {
        const TetGeom& g = s.geom(t);
        const double J = 6.0 * g.vol;
        Mat3 G[5][5];
        for (int a = 0; a < 5; ++a)
            for (int c = 0; c < 5; ++c) {
                Mat3 Gab = Mat3::Zero();
                for (int k = 0; k < 4; ++k)
                    for (int mm = 0; mm < 4; ++mm)
                        if (R.C[a][c][k][mm] != 0.0) Gab += R.C[a][c][k][mm] * g.glam[k] * g.glam[mm].transpose();
                G[a][c] = J * Gab;
            }
        for (int a = 0; a < 5; ++a)
            for (int c = 0; c < 5; ++c) {
                const double tr = G[a][c].trace();
                for (int i = 0; i < 3; ++i) {
                    const int row = s.raw_local(t, a, i);
                    tm.emplace_back(row, s.raw_local(t, c, i), J * R.M[a][c]);
                    for (int j = 0; j < 3; ++j)
                        ta.emplace_back(row, s.raw_local(t, c, j), mu * ((i == j ? tr : 0.0) + G[a][c](j, i)));
                }
            }
        for (int j = 0; j < 4; ++j) {
            const int q = m.tets[t][j];
            b.gauge[q] += g.vol / 4.0;
            for (int k = 0; k < 4; ++k) tl.emplace_back(q, m.tets[t][k], g.vol * g.glam[j].dot(g.glam[k]));
            for (int a = 0; a < 5; ++a)
                for (int c = 0; c < 3; ++c) tb.emplace_back(q, s.raw_local(t, a, c), g.glam[j][c] * J * R.I[a]);
        }
    }
    for (int v : s.solid_vertices())
        for (int c = 0; c < 3; ++c) tb.emplace_back(v, s.raw_vertex(v, c), -s.boundary_weight(v) * s.normal(v)[c]);

    const int nr = s.raw_size();
    b.M_raw.resize(nr, nr);
    b.M_raw.setFromTriplets(tm.begin(), tm.end());
    b.A_raw.resize(nr, nr);
    b.A_raw.setFromTriplets(ta.begin(), ta.end());
    b.B_raw.resize(s.np(), nr);
    b.B_raw.setFromTriplets(tb.begin(), tb.end());
    b.L_p1.resize(s.np(), s.np());
    b.L_p1.setFromTriplets(tl.begin(), tl.end());

    const int nf = s.nfree();
    std::vector<Trip> ts;
    for (int v : s.solid_vertices()) {
        const double aw = alpha[v] * s.boundary_weight(v);
        if (aw == 0.0) continue;
        const Vec3 y = s.lever(v);
        const int f = s.free_vertex(v);
        for (int d = 0; d < 2; ++d) {
            const Vec3 tv = d == 0 ? s.tangent1(v) : s.tangent2(v);
            Vec6 r;
            r.head<3>() = tv;
            r.tail<3>() = y.cross(tv);
            ts.emplace_back(f + d, f + d, aw);
            for (int k = 0; k < 6; ++k) {
                ts.emplace_back(f + d, nf + k, -aw * r[k]);
                ts.emplace_back(nf + k, f + d, -aw * r[k]);
                for (int l = 0; l < 6; ++l) ts.emplace_back(nf + k, nf + l, aw * r[k] * r[l]);
            }
        }
    }
    b.Aslip.resize(s.nz(), s.nz());
    b.Aslip.setFromTriplets(ts.begin(), ts.end());

    const SpMat& T = s.T();
    const SpMat Tt = T.transpose();
    b.Mu = (Tt * b.M_raw * T).pruned();
    b.A = (Tt * b.A_raw * T).pruned();
    b.A += b.Aslip;
    b.B = (b.B_raw * T).pruned();
    return b;
}

StokesBlocks assemble_stokes(const DomainConfig& domain, double mu) {
    return assemble_stokes(std::make_shared<FluidSpace>(domain), mu);
}

double viscous_energy_quadrature(const FluidSpace& s, const VecX& raw, double mu) {
    const TetRule& q = tet_rule(kQuad);
    double e = 0.0;
    for (int t = 0; t < s.nt(); ++t) {
        const double J = 6.0 * s.geom(t).vol;
        for (size_t n = 0; n < q.w.size(); ++n) {
            const Mat3 G = s.grad(raw, t, barycentric_from_ref(q.xi[n]));
            const Mat3 D = 0.5 * (G + G.transpose());
            e += J * q.w[n] * 2.0 * mu * D.squaredNorm();
        }
    }
    return e;
}

StokesSolver::StokesSolver(std::shared_ptr<const StokesBlocks> bp) : blocks_(std::move(bp)) {
    const StokesBlocks& blocks = *blocks_;
    B0_ = blocks.B_free();
    mass_saddle_.factor(blocks.free_block(blocks.Mu), B0_, blocks.gauge);
    steady_saddle_.factor(blocks.free_block(blocks.A), B0_, blocks.gauge);

    const int np = blocks.space->np();
    std::vector<Trip> trip;
    for (int k = 0; k < blocks.L_p1.outerSize(); ++k)
        for (SpMat::InnerIterator it(blocks.L_p1, k); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
    for (int i = 0; i < np; ++i) {
        trip.emplace_back(i, np, blocks.gauge[i]);
        trip.emplace_back(np, i, blocks.gauge[i]);
    }
    lap_matrix_.resize(np + 1, np + 1);
    lap_matrix_.setFromTriplets(trip.begin(), trip.end());
    lap_matrix_.makeCompressed();
    lap_.compute(lap_matrix_);
    if (lap_.info() != Eigen::Success) throw SolverError("Neumann factorization failed");

    S_cols_.resize(blocks.nz(), 6);
    for (int k = 0; k < 6; ++k) S_cols_.col(k) = steady_lifting(Vec6::Unit(k)).z;
}

StokesSolver::Projection StokesSolver::helmholtz_project(const VecX& f_raw) const {
    const FluidSpace& s = *blocks_->space;
    const VecX load = (s.T().transpose() * (blocks_->M_raw * f_raw)).head(s.nfree());
    Projection P;
    std::tie(P.Pf_free, P.potential) = project_load(load);
    VecX z = VecX::Zero(s.nz());
    z.head(s.nfree()) = P.Pf_free;
    P.Pf_raw = s.to_raw(z);
    P.grad_raw = f_raw - P.Pf_raw;
    return P;
}

std::pair<VecX, VecX> StokesSolver::project_load(const VecX& load_free) const {
    return mass_saddle_.solve(load_free);
}

VecX StokesSolver::potential(const VecX& r_free) const { return mass_saddle_.solve(r_free).second; }

StokesSolver::Lift StokesSolver::steady_lifting(const Vec6& xi) const {
    const StokesBlocks& b = *blocks_;
    const int nf = b.nf();
    VecX zx = VecX::Zero(b.nz());
    zx.tail<6>() = xi;
    const VecX f = -(b.A * zx).head(nf);
    const VecX g = -(b.B * zx);
    auto [y, p] = steady_saddle_.solve(f, g);
    Lift L;
    L.z = zx;
    L.z.head(nf) = y;
    L.raw = b.space->to_raw(L.z);
    L.p = p;
    return L;
}

VecX StokesSolver::solve_neumann(const VecX& flux, bool restrict_to_solid, double tol) const {
    const FluidSpace& s = *blocks_->space;
    const int np = s.np();
    if (flux.size() != np) throw std::invalid_argument("solve_neumann: flux size mismatch");
    VecX rhs = VecX::Zero(np + 1);
    double total = 0.0, scale = 0.0;
    for (int v = 0; v < np; ++v) {
        const VertexKind k = s.kinds()[v];
        if (k == VertexKind::Interior || (restrict_to_solid && k == VertexKind::Outer)) continue;
        rhs[v] = s.boundary_weight(v) * flux[v];
        total += rhs[v];
        scale += std::abs(rhs[v]);
    }
    if (std::abs(total) > tol * std::max(scale, 1.0)) {
        std::ostringstream os;
        os << "Neumann data not compatible: total flux " << total;
        throw CompatibilityError(os.str());
    }
    rhs.head(np).array() -= total / blocks_->gauge.sum() * blocks_->gauge.array();
    VecX sol = lap_.solve(rhs);
    return sol.head(np);
}

namespace {

Mat3 stress(const Mat3& G, double p, const TractionForm& form) {
    const Mat3 D = 0.5 * (G + G.transpose());
    if (form.kind == TractionForm::Kind::Newtonian) return 2.0 * form.mu * D - p * Mat3::Identity();
    return form.mu_of_s(D.squaredNorm()) * D - p * Mat3::Identity();
}

template <class PFun>
Moments moments_impl(const FluidSpace& s, const VecX& u, PFun pressure, const TractionForm& form) {
    const Mesh& m = s.mesh();
    const TriRule& q = tri_rule(4);
    const Vec3 c = s.domain().solid.center;
    Moments out;
    for (size_t f = 0; f < m.facets.size(); ++f) {
        const Facet& F = m.facets[f];
        if (F.tag != FacetTag::Solid) continue;
        const int t = s.facet_tet(static_cast<int>(f));
        const Vec3 an = facet_area_normal(m, F);
        const double area = an.norm();
        const Vec3 n = an / area;
        for (size_t k = 0; k < q.w.size(); ++k) {
            const double b1 = q.xi[k].x(), b2 = q.xi[k].y();
            const double b0 = 1.0 - b1 - b2;
            const Vec3 x = b0 * m.x[F.v[0]] + b1 * m.x[F.v[1]] + b2 * m.x[F.v[2]];
            const auto lam = s.barycentric(t, x);
            const double p = pressure(F, b0, b1, b2, x);
            const Vec3 tr = stress(s.grad(u, t, lam), p, form) * n;
            const double w = 2.0 * q.w[k] * area;
            out.force += w * tr;
            out.torque += w * (x - c).cross(tr);
        }
    }
    return out;
}

}  // namespace

Moments traction_moments(const FluidSpace& s, const VecX& u_raw, const VecX& p, const TractionForm& form) {
    return moments_impl(
        s, u_raw,
        [&](const Facet& F, double b0, double b1, double b2, const Vec3&) {
            return b0 * p[F.v[0]] + b1 * p[F.v[1]] + b2 * p[F.v[2]];
        },
        form);
}

Moments traction_moments(const FluidSpace& s, const VecX& u_raw, const std::function<double(const Vec3&)>& p,
                         const TractionForm& form) {
    return moments_impl(
        s, u_raw, [&](const Facet&, double, double, double, const Vec3& x) { return p(x); }, form);
}

CompatibilityReport check_compatibility(const StokesSolver& solver, const VecX& u0, const Vec3& l0,
                                        const Vec3& omega0, double p_exponent, double tol) {
    const StokesBlocks& b = solver.blocks();
    const FluidSpace& s = *b.space;
    const Mesh& m = s.mesh();
    CompatibilityReport r;
    Vec6 xi;
    xi << l0, omega0;
    const double scale = std::max({u0.cwiseAbs().maxCoeff(), xi.cwiseAbs().maxCoeff(), 1.0});

    const VecX Bu = b.B_raw * u0;
    const VecX Bs = b.B_raw.cwiseAbs() * u0.cwiseAbs();
    r.divergence = Bu.norm() / std::max(Bs.norm(), 1e-300);
    if (Bs.norm() == 0.0) r.divergence = 0.0;
    if (r.divergence > tol) r.violations.push_back("divergence");

    std::vector<char> bad(s.nv(), 0);
    for (int v = 0; v < s.nv(); ++v) {
        if (s.kinds()[v] != VertexKind::Outer) continue;
        const double a = u0.segment<3>(3 * v).norm();
        r.outer_trace = std::max(r.outer_trace, a);
        if (a > tol * scale) bad[v] = 1;
    }
    for (size_t f = 0; f < m.facets.size(); ++f) {
        const Facet& F = m.facets[f];
        if (F.tag == FacetTag::Outer && (bad[F.v[0]] || bad[F.v[1]] || bad[F.v[2]]))
            r.outer_facets.push_back(static_cast<int>(f));
    }
    if (r.outer_trace > tol * scale) r.violations.push_back("outer_trace");

    for (int v : s.solid_vertices()) {
        const double d = u0.segment<3>(3 * v).dot(s.normal(v)) - s.normal_row(v).dot(xi);
        r.normal_trace = std::max(r.normal_trace, std::abs(d));
    }
    if (r.normal_trace > tol * scale) r.violations.push_back("normal_trace");

    if (p_exponent > 3.0) {
        // Weak tangential residual after removing the best pressure.
        VecX z = VecX::Zero(s.nz());
        z.head(s.nfree()) = s.free_from_raw(u0 - s.to_raw([&] {
            VecX zx = VecX::Zero(s.nz());
            zx.tail<6>() = xi;
            return zx;
        }()), std::numeric_limits<double>::infinity());
        z.tail<6>() = xi;
        const VecX rf = -(b.A * z).head(s.nfree());
        const VecX p = solver.potential(rf);
        const VecX res = rf - b.B_free().transpose() * p;
        r.slip_trace = 0.0;
        for (int v : s.solid_vertices()) {
            const int f = s.free_vertex(v);
            const double w = s.boundary_weight(v);
            r.slip_trace = std::max(r.slip_trace, std::hypot(res[f], res[f + 1]) / w);
        }
        if (r.slip_trace > tol * scale) r.violations.push_back("slip_trace");
    }
    r.ok = r.violations.empty();
    return r;
}

}  // namespace slipfsi
