#include "slipfsi/nonnewtonian.hpp"

#include "slipfsi/weakform.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace slipfsi {

namespace {

constexpr int kViscRule = 5;  // exact for products of MINI gradients

Mat3 symmetric(const Mat3& g) { return 0.5 * (g + g.transpose()); }

}  // namespace

const char* kind_name(ViscosityModel::Kind k) {
    switch (k) {
        case ViscosityModel::Kind::Newtonian: return "newtonian";
        case ViscosityModel::Kind::Carreau: return "carreau";
        case ViscosityModel::Kind::PowerLaw: return "power_law";
    }
    return "?";
}

ViscosityModel::Kind parse_viscosity_kind(const std::string& s) {
    if (s == "newtonian") return ViscosityModel::Kind::Newtonian;
    if (s == "carreau") return ViscosityModel::Kind::Carreau;
    if (s == "power_law") return ViscosityModel::Kind::PowerLaw;
    throw std::invalid_argument("unknown viscosity kind '" + s + "' (newtonian|carreau|power_law)");
}

void ViscosityModel::validate() const {
    if (!(mu0 > 0.0)) throw std::invalid_argument("viscosity.mu0 must be positive");
    if (!(d > 1.0)) throw std::invalid_argument("viscosity.d must exceed 1");
}

ViscosityModel::Value ViscosityModel::eval(double s) const {
    if (!(s >= 0.0)) throw std::invalid_argument("viscosity: s = |Du|^2 must be nonnegative");
    Value v;
    const double e = 0.5 * (d - 2.0);
    switch (kind) {
        case Kind::Newtonian:
            v.mu = mu0;
            break;
        case Kind::Carreau:
            v.mu = mu0 * std::pow(1.0 + s, e);
            v.mu_prime = mu0 * e * std::pow(1.0 + s, e - 1.0);
            break;
        case Kind::PowerLaw:
            if (s == 0.0) {
                if (d < 2.0) throw SingularViscosityError("power-law viscosity is singular at Du = 0 for d < 2");
                if (d == 2.0) {
                    v.mu = mu0;
                } else {
                    v.mu = 0.0;
                    v.mu_prime = d < 4.0 ? std::numeric_limits<double>::infinity() : (d == 4.0 ? mu0 : 0.0);
                }
            } else {
                v.mu = mu0 * std::pow(s, e);
                v.mu_prime = mu0 * e * std::pow(s, e - 1.0);
            }
            break;
    }
    v.elliptic = v.mu > 0.0 && v.mu + 2.0 * s * v.mu_prime > 0.0;
    return v;
}

QuasiLinearCoefficients coefficients(const ViscosityModel& m, const Mat3& D) {
    const auto v = m.eval(D.squaredNorm());
    QuasiLinearCoefficients c;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l)
                    c.a[i][j][k][l] = 0.5 * v.mu * ((i == k && j == l) + (i == l && j == k)) +
                                      2.0 * v.mu_prime * (D(i, j) * D(k, l));
    return c;
}

double legendre_hadamard(const QuasiLinearCoefficients& a, const Vec3& xi, const Vec3& eta) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) s += a.a[i][j][k][l] * xi[j] * xi[k] * eta[i] * eta[l];
    return s;
}

EllipticityReport sample_legendre_hadamard(const ViscosityModel& m, int samples, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(-4.0, 2.0);
    auto unit = [&] {
        Vec3 v(nd(gen), nd(gen), nd(gen));
        return Vec3(v / v.norm());
    };
    EllipticityReport r;
    r.min_value = std::numeric_limits<double>::infinity();
    for (int n = 0; n < samples; ++n) {
        Mat3 D;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) D(i, j) = nd(gen);
        D = symmetric(D);
        D *= std::sqrt(std::pow(10.0, ud(gen))) / D.norm();
        const double v = legendre_hadamard(coefficients(m, D), unit(), unit());
        r.min_value = std::min(r.min_value, v);
    }
    r.samples = samples;
    r.positive = samples > 0 && r.min_value > 0.0;
    return r;
}

Vec3 contract_second_derivatives(const QuasiLinearCoefficients& a, const Tensor3& d2w) {
    Vec3 out = Vec3::Zero();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) out[i] += a.a[i][j][k][l] * d2w[l](j, k);
    return out;
}

MetricField MetricField::from_map(const FluidSpace& s, const FlowMap& map, int n) {
    if (map.num_points() != s.nv()) throw std::invalid_argument("MetricField: map does not track the mesh vertices");
    MetricField f;
    f.G.resize(s.nv());
    f.b.resize(s.nv());
    const Mat3& Q = map.Q(n);
    for (int v = 0; v < s.nv(); ++v) {
        const Mat3 JY = map.J(n, v).inverse();
        f.G[v] = JY * Q;
        f.b[v] = JY * map.velocity(n, v);
    }
    f.classify(s);
    return f;
}

MetricField MetricField::identity_field(const FluidSpace& s) {
    MetricField f;
    f.G.assign(s.nv(), Mat3::Identity());
    f.b.assign(s.nv(), Vec3::Zero());
    f.classify(s);
    return f;
}

void MetricField::classify(const FluidSpace& s) {
    std::vector<char> vid(s.nv());
    for (int v = 0; v < s.nv(); ++v) vid[v] = (G[v] - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-13;
    tet_identity.assign(s.nt(), 1);
    identity = true;
    for (int t = 0; t < s.nt(); ++t) {
        for (int k = 0; k < 4; ++k)
            if (!vid[s.mesh().tets[t][k]]) tet_identity[t] = 0;
        identity = identity && tet_identity[t];
    }
}

VecX viscous_action(const FluidSpace& s, const ViscosityModel& m, const MetricField& metric, const VecX& u_raw) {
    VecX out = VecX::Zero(s.raw_size());
    for (int t = 0; t < s.nt(); ++t) {
        const Local35 U = gather(s, u_raw, t);
        const bool id = metric.tet_identity.empty() || metric.tet_identity[t];
        Local35 loc = Local35::Zero();
        for (const QPoint& q : tet_points(s, t, kViscRule)) {
            const Mat3 G = id ? Mat3::Identity() : interpolate_vertex(s, metric.G, t, q.lambda);
            const Mat3 D = transformed_sym_gradient(grad_at(U, q), G);
            const double mu = m.eval(D.squaredNorm()).mu;
            add_test(loc, q, Vec3::Zero(), mu * D * G.transpose());
        }
        scatter_add(s, t, loc, out);
    }
    return out;
}

SpMat assemble_tangent(const FluidSpace& s, const ViscosityModel& m, const VecX& ustar_raw) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(s.nt()) * 225);
    for (int t = 0; t < s.nt(); ++t) {
        const Local35 U = gather(s, ustar_raw, t);
        Eigen::Matrix<double, 15, 15> K = Eigen::Matrix<double, 15, 15>::Zero();
        for (const QPoint& q : tet_points(s, t, kViscRule)) {
            const Mat3 D = symmetric(grad_at(U, q));
            const auto v = m.eval(D.squaredNorm());
            std::array<Vec3, 5> Dg;
            for (int a = 0; a < 5; ++a) Dg[a] = D * q.dphi[a];
            for (int a = 0; a < 5; ++a)
                for (int b = 0; b < 5; ++b) {
                    const double dd = q.dphi[a].dot(q.dphi[b]);
                    Mat3 blk = 0.5 * v.mu * (dd * Mat3::Identity() + q.dphi[b] * q.dphi[a].transpose());
                    if (v.mu_prime != 0.0) blk += 2.0 * v.mu_prime * Dg[a] * Dg[b].transpose();
                    K.block<3, 3>(3 * a, 3 * b) += q.w * blk;
                }
        }
        for (int a = 0; a < 5; ++a)
            for (int b = 0; b < 5; ++b)
                for (int i = 0; i < 3; ++i)
                    for (int k = 0; k < 3; ++k)
                        trip.emplace_back(s.raw_local(t, a, i), s.raw_local(t, b, k), K(3 * a + i, 3 * b + k));
    }
    SpMat A(s.raw_size(), s.raw_size());
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

VecX constitutive_remainder(const FluidSpace& s, const ViscosityModel& m, const SpMat& tangent_raw,
                            const VecX& ustar_raw, const VecX& uhat_raw) {
    const MetricField id;
    return viscous_action(s, m, id, ustar_raw + uhat_raw) - tangent_raw * uhat_raw;
}

BodyHistory Trajectory::body(int nf) const {
    BodyHistory h;
    h.t = t;
    for (const VecX& zn : z) {
        h.l_body.push_back(zn.segment<3>(nf));
        h.omega_body.push_back(zn.segment<3>(nf + 3));
    }
    return h;
}

Trajectory newtonian_reference(const CoupledOperator& op, const VecX& z0, double dt, int steps) {
    const LinearStepper stepper(op, dt);
    Trajectory tr;
    tr.t.push_back(0.0);
    tr.z.push_back(z0);
    tr.p.push_back(VecX::Zero(op.blocks().B.rows()));
    const VecX zero = VecX::Zero(op.nz());
    for (int n = 1; n <= steps; ++n) {
        auto st = stepper.step(tr.z.back(), zero);
        tr.t.push_back(n * dt);
        tr.z.push_back(std::move(st.z));
        tr.p.push_back(std::move(st.p));
    }
    if (steps > 0) tr.p[0] = tr.p[1];
    return tr;
}

RemainderTerms split_rows(const FluidSpace& s, const VecX& load_z) {
    const int nf = s.nfree();
    RemainderTerms r;
    r.G0 = load_z.head(nf);
    r.H1 = VecX::Zero(nf);
    for (int v : s.solid_vertices()) {
        const int f = s.free_vertex(v);
        r.H1.segment<2>(f) = r.G0.segment<2>(f);
        r.G0.segment<2>(f).setZero();
    }
    r.G1 = load_z.segment<3>(nf);
    r.G2 = load_z.segment<3>(nf + 3);
    return r;
}

VecX RemainderTerms::assemble(const FluidSpace& s) const {
    VecX z(s.nz());
    z.head(s.nfree()) = G0 + H1;
    z.segment<3>(s.nfree()) = G1;
    z.segment<3>(s.nfree() + 3) = G2;
    return z;
}

RemainderTerms remainder_terms(const FluidSpace& s, const ViscosityModel& m, const MetricField& metric,
                               const SpMat& tangent_raw, double mu_ref, const VecX& ustar_z, const VecX& uhat_z,
                               const RigidBody& body) {
    const VecX us = s.to_raw(ustar_z);
    const VecX uh = s.to_raw(uhat_z);
    const MetricField id;
    VecX raw = tangent_raw * uh + viscous_action(s, ViscosityModel::newtonian(2.0 * mu_ref), id, us) -
               viscous_action(s, m, metric, us + uh);
    VecX z = s.T().transpose() * raw;
    const int nf = s.nfree();
    const VecX zf = ustar_z + uhat_z;
    const Vec3 l = zf.segment<3>(nf), w = zf.segment<3>(nf + 3);
    z.segment<3>(nf) += -body.mass * w.cross(l);
    z.segment<3>(nf + 3) += (body.inertia * w).cross(w);
    return split_rows(s, z);
}

std::vector<Vec3> nonlinear_slip_rhs(const FluidSpace& s, const VecX& u_raw) {
    std::vector<Vec3> g(s.nv(), Vec3::Zero());
    for (int v : s.solid_vertices()) {
        const Vec3 u = u_raw.segment<3>(s.raw_vertex(v, 0));
        const Vec3& n = s.normal(v);
        const Vec3 ut = u - u.dot(n) * n;
        g[v] = s.domain().alpha[v] * (1.0 - u.norm()) * ut;
    }
    return g;
}

VecX slip_load(const FluidSpace& s, const std::vector<Vec3>& g) {
    const int nf = s.nfree();
    VecX z = VecX::Zero(s.nz());
    for (int v : s.solid_vertices()) {
        const double aw = s.domain().alpha[v] * s.boundary_weight(v);
        if (aw == 0.0) continue;
        const int f = s.free_vertex(v);
        const Vec3 y = s.lever(v);
        const Vec3 &t1 = s.tangent1(v), &t2 = s.tangent2(v);
        const double g1 = g[v].dot(t1), g2 = g[v].dot(t2);
        z[f] += aw * g1;
        z[f + 1] += aw * g2;
        z.segment<3>(nf) -= aw * (g1 * t1 + g2 * t2);
        z.segment<3>(nf + 3) -= aw * (g1 * y.cross(t1) + g2 * y.cross(t2));
    }
    return z;
}

LinearEvolution::LinearEvolution(const CoupledOperator& op, double dt, std::vector<SpMat> viscous)
    : op_(&op), dt_(dt), steps_(static_cast<int>(viscous.size())) {
    if (!(dt > 0.0)) throw std::invalid_argument("LinearEvolution: dt must be positive");
    const StokesBlocks& b = op.blocks();
    if (viscous.empty()) {
        S_.push_back((op.MM() / dt + b.A).pruned());
        steps_ = -1;
    } else {
        for (SpMat& A : viscous) {
            if (A.rows() != op.nz()) throw std::invalid_argument("LinearEvolution: viscous matrix size mismatch");
            S_.push_back((op.MM() / dt + A + b.Aslip).pruned());
        }
    }
    full_.resize(S_.size());
    fluid_.resize(S_.size());
}

const SpMat& LinearEvolution::stiffness(int n) const {
    if (steps_ < 0) return S_[0];
    if (n < 1 || n > steps_) throw std::out_of_range("LinearEvolution: level out of range");
    return S_[n - 1];
}

const RealSaddle& LinearEvolution::full_saddle(int n) const {
    const size_t k = steps_ < 0 ? 0 : static_cast<size_t>(n - 1);
    if (!full_[k]) full_[k] = std::make_unique<RealSaddle>(stiffness(n), op_->blocks().B, op_->blocks().gauge);
    return *full_[k];
}

const RealSaddle& LinearEvolution::fluid_saddle(int n) const {
    const size_t k = steps_ < 0 ? 0 : static_cast<size_t>(n - 1);
    if (!fluid_[k]) {
        const int nf = op_->nf();
        const SpMat Sff = stiffness(n).topLeftCorner(nf, nf);
        const SpMat Bf = op_->blocks().B.leftCols(nf);
        fluid_[k] = std::make_unique<RealSaddle>(Sff, Bf, op_->blocks().gauge);
    }
    return *fluid_[k];
}

namespace {

VecX lift_z(const VecX& H, int nz) {
    VecX Hz = VecX::Zero(nz);
    if (H.size() > 0) Hz.head(H.size()) = H;
    return Hz;
}

}  // namespace

Trajectory LinearEvolution::solve_monolithic(const VecX& z0, const std::vector<VecX>& loads,
                                             const std::vector<VecX>& lifts) const {
    const CoupledOperator& op = *op_;
    const int N = static_cast<int>(loads.size());
    if (steps_ >= 0 && N != steps_) throw std::invalid_argument("solve_monolithic: load count mismatch");
    Trajectory tr;
    tr.t.push_back(0.0);
    tr.z.push_back(z0);
    tr.p.push_back(VecX::Zero(op.blocks().B.rows()));
    const VecX gzero = VecX::Zero(op.blocks().B.rows());
    for (int n = 1; n <= N; ++n) {
        const VecX Hz = lift_z(n - 1 < static_cast<int>(lifts.size()) ? lifts[n - 1] : VecX(), op.nz());
        const VecX rhs = op.MM() * tr.z.back() / dt_ + loads[n - 1] - stiffness(n) * Hz;
        auto [y, p] = full_saddle(n).solve(rhs, gzero);
        tr.t.push_back(n * dt_);
        tr.z.push_back(y + Hz);
        tr.p.push_back(p);
    }
    if (N > 0) tr.p[0] = tr.p[1];
    return tr;
}

Trajectory LinearEvolution::solve_volterra(const VecX& z0, const std::vector<VecX>& loads,
                                           const std::vector<VecX>& lifts, double tol, int max_iter,
                                           VolterraLog* log) const {
    const CoupledOperator& op = *op_;
    const StokesBlocks& b = op.blocks();
    const int N = static_cast<int>(loads.size());
    const int nf = op.nf(), nz = op.nz();
    if (steps_ >= 0 && N != steps_) throw std::invalid_argument("solve_volterra: load count mismatch");
    const Eigen::PartialPivLU<Mat6> Klu(op.K());
    const Mat6& I = op.momentum();
    const SpMat Bxi = b.B.rightCols(6);

    std::vector<Vec6> xi(N + 1, Vec6(z0.tail<6>()));
    std::vector<VecX> Hz(N + 1);
    for (int n = 1; n <= N; ++n)
        Hz[n] = lift_z(n - 1 < static_cast<int>(lifts.size()) ? lifts[n - 1] : VecX(), nz);

    auto fluid_pass = [&](const std::vector<Vec6>& x) {
        Trajectory tr;
        tr.t.push_back(0.0);
        tr.z.push_back(z0);
        tr.p.push_back(VecX::Zero(b.B.rows()));
        for (int n = 1; n <= N; ++n) {
            VecX zx = Hz[n];
            zx.tail<6>() = x[n];
            const VecX rhs = op.MM() * tr.z.back() / dt_ + loads[n - 1] - stiffness(n) * zx;
            auto [y, p] = fluid_saddle(n).solve(rhs.head(nf), VecX(-(Bxi * x[n])));
            zx.head(nf) += y;
            tr.t.push_back(n * dt_);
            tr.z.push_back(std::move(zx));
            tr.p.push_back(std::move(p));
        }
        if (N > 0) tr.p[0] = tr.p[1];
        return tr;
    };

    VolterraLog local;
    VolterraLog& lg = log ? *log : local;
    lg = VolterraLog{};
    int growth = 0;
    for (int it = 1; it <= max_iter; ++it) {
        const Trajectory tr = fluid_pass(xi);
        std::vector<Vec6> next(N + 1);
        next[0] = xi[0];
        Vec6 delta = Vec6::Zero();
        double corr = 0.0, scale = 0.0;
        for (int n = 1; n <= N; ++n) {
            const VecX& zn = tr.z[n];
            const VecX& zp = tr.z[n - 1];
            VecX r = b.Mu * (zn - zp) / dt_ + (stiffness(n) - op.MM() / dt_) * zn + b.B.transpose() * tr.p[n];
            const Vec6 rho = I * (xi[n] - xi[n - 1]) / dt_ + r.tail<6>() - loads[n - 1].tail<6>();
            delta -= dt_ * Klu.solve(rho);
            next[n] = xi[n] + delta;
            corr = std::max(corr, (next[n] - xi[n]).cwiseAbs().maxCoeff());
            scale = std::max(scale, next[n].cwiseAbs().maxCoeff());
        }
        xi = std::move(next);
        lg.iterations = it;
        if (!lg.corrections.empty()) lg.ratios.push_back(lg.corrections.back() > 0 ? corr / lg.corrections.back() : 0.0);
        lg.corrections.push_back(corr);
        if (corr <= tol * std::max(1.0, scale)) {
            lg.converged = true;
            break;
        }
        if (!lg.ratios.empty() && lg.ratios.back() >= 1.0) {
            if (++growth >= std::max(3, N + 1))
                throw SolverError("volterra iteration does not contract on this horizon");
        } else {
            growth = 0;
        }
        if (!std::isfinite(corr)) throw SolverError("volterra iteration diverged");
    }
    if (!lg.converged) throw SolverError("volterra iteration did not converge within max_iter");
    return fluid_pass(xi);
}

VolterraResult volterra_solve(const CoupledOperator& op, double dt, const std::vector<SpMat>& viscous,
                              const VecX& z0, const std::vector<VecX>& loads, const std::vector<VecX>& lifts,
                              double tol, int max_iter, int min_steps) {
    int N = static_cast<int>(loads.size());
    VolterraResult res;
    while (true) {
        std::vector<SpMat> visc;
        if (!viscous.empty()) visc.assign(viscous.begin(), viscous.begin() + N);
        const LinearEvolution ev(op, dt, std::move(visc));
        const std::vector<VecX> ld(loads.begin(), loads.begin() + N);
        const std::vector<VecX> lf(lifts.begin(), lifts.begin() + std::min<int>(N, static_cast<int>(lifts.size())));
        try {
            res.traj = ev.solve_volterra(z0, ld, lf, tol, max_iter, &res.log);
            res.steps = N;
            return res;
        } catch (const SolverError&) {
            if (N / 2 < std::max(1, min_steps)) throw;
            N /= 2;
            ++res.halvings;
        }
    }
}

}  // namespace slipfsi
