#include "slipfsi/mesh_io.hpp"
#include "slipfsi/nonnewtonian.hpp"
#include "slipfsi/picard.hpp"
#include "slipfsi/spectral.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace slipfsi;

namespace {

const Problem& coarse() {
    static const Problem pb = Problem::create(make_reference_geometry(1.0, 4.0, 0), 2.0, 1.0);
    return pb;
}

VecX random_vec(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> N;
    VecX v(n);
    for (int i = 0; i < n; ++i) v[i] = N(rng);
    return v;
}

Mat3 random_sym(std::mt19937& rng, double scale) {
    std::normal_distribution<double> N;
    Mat3 a;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a(i, j) = scale * N(rng);
    return 0.5 * (a + a.transpose());
}

VecX admissible(const Problem& pb, unsigned seed, double scale) {
    const VecX w = pb.solver->helmholtz_project(random_vec(pb.space->raw_size(), seed)).Pf_free;
    return scale * pb.op->to_z(w, random_vec(6, seed + 7));
}

/// Quadratic test field u_i(y) = c_i + B_ij y_j + 1/2 H_i(j,k) y_j y_k.
struct Quadratic {
    Vec3 c;
    Mat3 B;
    Tensor3 H;

    Mat3 grad(const Vec3& y) const {
        Mat3 g = B;
        for (int i = 0; i < 3; ++i) g.row(i) += (H[i] * y).transpose();
        return g;
    }
};

}  // namespace

TEST_CASE("viscosity evaluation") {
    for (double s : {0.0, 0.3, 7.0}) {
        const auto v = ViscosityModel::carreau(1.7, 2.0).eval(s);
        CHECK(v.mu == doctest::Approx(1.7).epsilon(1e-15));
        CHECK(v.mu_prime == 0.0);
        const auto n = ViscosityModel::newtonian(1.7).eval(s);
        CHECK(n.mu == 1.7);
        CHECK(n.mu_prime == 0.0);
    }
    const auto c4 = ViscosityModel::carreau(1.0, 4.0).eval(1.0);
    CHECK(c4.mu == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(c4.mu_prime == doctest::Approx(1.0).epsilon(1e-14));

    const ViscosityModel m = ViscosityModel::carreau(1.3, 1.5);
    for (int k = 0; k <= 200; ++k) {
        const double s = 0.5 * k;
        const auto v = m.eval(s);
        const double closed = 1.3 * std::pow(1.0 + s, (1.5 - 4.0) / 2.0) * (1.0 + 0.5 * s);
        CHECK(v.mu + 2.0 * s * v.mu_prime == doctest::Approx(closed).epsilon(1e-12));
        CHECK(v.mu + 2.0 * s * v.mu_prime > 0.0);
        CHECK(v.elliptic);
    }

    CHECK_THROWS_AS(m.eval(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(ViscosityModel::power_law(1.0, 1.5).eval(0.0), SingularViscosityError);
    CHECK_NOTHROW(ViscosityModel::power_law(1.0, 3.0).eval(0.0));
    const auto p = ViscosityModel::power_law(2.0, 3.0).eval(4.0);
    CHECK(p.mu == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(p.mu_prime == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_THROWS(ViscosityModel::carreau(1.0, 1.0).validate());
    CHECK_THROWS(ViscosityModel::carreau(-1.0, 3.0).validate());
    CHECK(parse_viscosity_kind("carreau") == ViscosityModel::Kind::Carreau);
    CHECK_THROWS(parse_viscosity_kind("bingham"));
}

TEST_CASE("quasi-linear coefficients: Newtonian form and symmetries") {
    std::mt19937 rng(3);
    const Mat3 D = random_sym(rng, 0.7);
    const auto an = coefficients(ViscosityModel::newtonian(1.5), D);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l)
                    CHECK(an(i, j, k, l) == 0.75 * ((i == k && j == l) + (i == l && j == k)));

    const auto a = coefficients(ViscosityModel::carreau(1.5, 3.0), D);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) {
                    CHECK(a(i, j, k, l) == a(k, l, i, j));
                    CHECK(a(i, j, k, l) == a(j, i, k, l));
                    CHECK(a(i, j, k, l) == a(i, j, l, k));
                }
}

TEST_CASE("contraction reproduces the divergence of the generalized stress") {
    std::mt19937 rng(8);
    std::normal_distribution<double> N;
    Quadratic u;
    u.c = Vec3(N(rng), N(rng), N(rng));
    u.B = 0.5 * Mat3::Random();
    for (auto& h : u.H) h = random_sym(rng, 0.4);
    const ViscosityModel m = ViscosityModel::carreau(1.2, 3.0);
    const Vec3 y0(0.3, -0.2, 0.5);

    auto flux = [&](const Vec3& y) {
        const Mat3 g = u.grad(y);
        const Mat3 D = 0.5 * (g + g.transpose());
        return Mat3(m.eval(D.squaredNorm()).mu * D);
    };
    const Mat3 g0 = u.grad(y0);
    const Vec3 exact = contract_second_derivatives(coefficients(m, 0.5 * (g0 + g0.transpose())), u.H);

    std::vector<double> err;
    for (double h : {1e-2, 5e-3}) {
        Vec3 div = Vec3::Zero();
        for (int j = 0; j < 3; ++j) {
            const Vec3 e = Vec3::Unit(j) * h;
            div += (flux(y0 + e).col(j) - flux(y0 - e).col(j)) / (2.0 * h);
        }
        err.push_back((div - exact).norm());
    }
    CHECK(err[1] <= 1e-5 * exact.norm());
    CHECK(std::log2(err[0] / err[1]) > 1.8);
}

TEST_CASE("Legendre-Hadamard positivity") {
    for (const ViscosityModel& m : {ViscosityModel::carreau(2.0, 1.5), ViscosityModel::carreau(2.0, 3.0),
                                    ViscosityModel::power_law(2.0, 1.5), ViscosityModel::power_law(2.0, 3.0)}) {
        const EllipticityReport r = sample_legendre_hadamard(m, 1000);
        CHECK(r.samples == 1000);
        CHECK(r.positive);
        CHECK(r.min_value > 0.0);
    }
    // Newtonian: the form is (mu/2)(|xi|^2 |eta|^2 + (xi . eta)^2)
    const auto a = coefficients(ViscosityModel::newtonian(2.0), Mat3::Zero());
    const Vec3 xi(1, 0, 0), eta(0, 1, 0);
    CHECK(legendre_hadamard(a, xi, eta) == doctest::Approx(1.0));
    CHECK(legendre_hadamard(a, xi, xi) == doctest::Approx(2.0));
}

TEST_CASE("transformed symmetric gradient") {
    std::mt19937 rng(4);
    const Mat3 g = Mat3::Random();
    CHECK((transformed_sym_gradient(g, Mat3::Identity()) - 0.5 * (g + g.transpose())).norm() <= 1e-15);

    const Problem& pb = coarse();
    const FluidSpace& s = *pb.space;
    FlowMap map(*pb.domain, pb.domain->mesh.x, Vec3(0.05, 0.0, 0.02), Vec3(0.0, 0.1, 0.05));
    for (int n = 1; n <= 10; ++n) map.advance(Vec3(0.05, 0.01 * n, 0.02), Vec3(0.02 * n, 0.1, 0.05), 0.05);
    const int n = map.levels() - 1;
    const MetricField metric = MetricField::from_map(s, map, n);
    CHECK_FALSE(metric.identity);

    // rigid field l + w x y on the solid, where J_X = Q
    const Vec3 w(0.3, -0.4, 0.2);
    Mat3 W;
    W << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    for (int v : s.solid_vertices()) {
        CHECK((metric.G[v] - Mat3::Identity()).norm() <= 1e-8);
        CHECK(transformed_sym_gradient(W, metric.G[v]).norm() <= 1e-8);
    }

    // pushforward u(x) = Q u~(Y(x)) of a linear field: spatial D u = Q D~ Q^T
    const Mat3 Bm = Mat3::Random();
    const Mat3& Q = map.Q(n);
    auto spatial = [&](const Vec3& x) { return Vec3(Q * (Bm * map.invert(x, n))); };
    int checked = 0;
    for (int v = 0; v < s.nv() && checked < 5; v += 3) {
        if (s.kinds()[v] != VertexKind::Interior) continue;
        const Vec3 x = map.X(n, v);
        const Mat3 Dt = transformed_sym_gradient(Bm, metric.G[v]);
        const Mat3 want = Q * Dt * Q.transpose();
        std::vector<double> err;
        for (double h : {2e-3, 1e-3}) {
            Mat3 grad;
            for (int j = 0; j < 3; ++j) {
                const Vec3 e = Vec3::Unit(j) * h;
                grad.col(j) = (spatial(x + e) - spatial(x - e)) / (2.0 * h);
            }
            err.push_back((0.5 * (grad + grad.transpose()) - want).norm());
        }
        CHECK(err[1] <= 1e-5 * std::max(want.norm(), 1.0));
        ++checked;
    }
    CHECK(checked == 5);
}

TEST_CASE("constant viscosity collapses to the Newtonian operator") {
    const Problem& pb = coarse();
    const FluidSpace& s = *pb.space;
    const SpMat& A = pb.blocks->A_raw;
    const VecX ustar = s.to_raw(admissible(pb, 5, 1.0));
    for (const ViscosityModel& m : {ViscosityModel::carreau(2.0, 2.0), ViscosityModel::newtonian(2.0)}) {
        const SpMat K = assemble_tangent(s, m, ustar);
        CHECK(SpMat(K - A).norm() <= 1e-10 * A.norm());
        const VecX act = viscous_action(s, m, MetricField::identity_field(s), ustar);
        CHECK((act - A * ustar).norm() <= 1e-10 * (A * ustar).norm());
    }
    // on divergence-free test fields the frozen tangent of a shear-thinning
    // model at u* = 0 is the Newtonian operator with viscosity mu(0)
    const SpMat K0 = assemble_tangent(s, ViscosityModel::carreau(2.0, 1.5), VecX::Zero(s.raw_size()));
    CHECK(SpMat(K0 - A).norm() <= 1e-10 * A.norm());
}

TEST_CASE("Newtonian reference trajectory") {
    const Problem& pb = coarse();
    const CoupledOperator& op = *pb.op;
    const Trajectory zero = newtonian_reference(op, VecX::Zero(op.nz()), 0.05, 5);
    CHECK(zero.levels() == 6);
    for (const VecX& z : zero.z) CHECK(z.norm() == 0.0);

    const double dt = 0.02;
    const Trajectory tr = newtonian_reference(op, admissible(pb, 9, 1e-2), dt, 150);
    REQUIRE(tr.levels() == 151);
    const StokesBlocks& b = op.blocks();
    for (int n = 1; n < tr.levels(); ++n) {
        const VecX r = op.MM() * (tr.z[n] - tr.z[n - 1]) / dt + op.AA() * tr.z[n] + b.B.transpose() * tr.p[n];
        CHECK(r.norm() <= 1e-8 * (op.MM() * tr.z[n - 1]).norm() / dt);
        CHECK((b.B * tr.z[n]).norm() <= 1e-10 * tr.z[n].norm());
    }
    std::vector<double> y;
    for (const VecX& z : tr.z) y.push_back(std::sqrt(2.0 * op.energy(z)));
    const DecayFit f = fit_decay_rate(tr.t, y);
    CHECK(f.decaying);
    CHECK(f.eta > 0.0);
}

TEST_CASE("remainder terms") {
    const Problem& pb = coarse();
    const FluidSpace& s = *pb.space;
    const VecX zero = VecX::Zero(s.nz());
    const ViscosityModel carreau = ViscosityModel::carreau(2.0, 3.0);
    const MetricField id = MetricField::identity_field(s);
    const SpMat K0 = assemble_tangent(s, carreau, VecX::Zero(s.raw_size()));
    const RemainderTerms r0 = remainder_terms(s, carreau, id, K0, 1.0, zero, zero, pb.body);
    CHECK(r0.G0.norm() == 0.0);
    CHECK(r0.H1.norm() == 0.0);
    CHECK(r0.G1.norm() == 0.0);
    CHECK(r0.G2.norm() == 0.0);

    const VecX us = admissible(pb, 11, 0.1);
    const VecX uh = admissible(pb, 12, 0.05);
    const ViscosityModel newt = ViscosityModel::newtonian(2.0);
    const RemainderTerms rn = remainder_terms(s, newt, id, pb.blocks->A_raw, 1.0, us, uh, pb.body);
    const double scale = (pb.blocks->A * (us + uh)).norm();
    CHECK(rn.G0.norm() <= 1e-12 * scale);
    CHECK(rn.H1.norm() <= 1e-12 * scale);
    const VecX zf = us + uh;
    const Vec3 l = zf.segment<3>(s.nfree()), w = zf.tail<3>();
    CHECK((rn.G1 + pb.body.mass * w.cross(l)).norm() <= 1e-12 * scale);
    CHECK((rn.G2 - (pb.body.inertia * w).cross(w)).norm() <= 1e-12 * scale);
    CHECK((rn.assemble(s) - (s.T().transpose() * VecX::Zero(s.raw_size()))).size() == s.nz());

    // Q(u*, u^) - Q(u*, 0) is quadratic in u^
    const VecX ustar = s.to_raw(us);
    const VecX uhat = s.to_raw(uh);
    const SpMat K = assemble_tangent(s, carreau, ustar);
    const VecX q0 = constitutive_remainder(s, carreau, K, ustar, VecX::Zero(s.raw_size()));
    const VecX q1 = constitutive_remainder(s, carreau, K, ustar, uhat) - q0;
    const VecX q2 = constitutive_remainder(s, carreau, K, ustar, VecX(0.5 * uhat)) - q0;
    CHECK(q1.norm() / q2.norm() == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("nonlinear wall law data") {
    const Problem& pb = coarse();
    const FluidSpace& s = *pb.space;
    for (const Vec3& g : nonlinear_slip_rhs(s, VecX::Zero(s.raw_size()))) CHECK(g.norm() == 0.0);

    std::mt19937 rng(13);
    std::normal_distribution<double> N;
    VecX unit = VecX::Zero(s.raw_size());
    VecX u1 = VecX::Zero(s.raw_size()), u2 = VecX::Zero(s.raw_size());
    for (int v : s.solid_vertices()) {
        const Vec3 a = Vec3(N(rng), N(rng), N(rng));
        unit.segment<3>(3 * v) = a.normalized();
        u1.segment<3>(3 * v) = 0.5 * a;
        u2.segment<3>(3 * v) = Vec3(N(rng), N(rng), N(rng));
    }
    for (int v : s.solid_vertices()) CHECK(nonlinear_slip_rhs(s, unit)[v].norm() <= 1e-15);

    const auto g1 = nonlinear_slip_rhs(s, u1);
    const auto g2 = nonlinear_slip_rhs(s, u2);
    for (int v : s.solid_vertices()) {
        const Vec3& n = s.normal(v);
        auto tang = [&](const Vec3& x) { return Vec3(x - x.dot(n) * n); };
        const Vec3 a = u1.segment<3>(3 * v), b = u2.segment<3>(3 * v);
        const double al = s.domain().alpha[v];
        const Vec3 split = al * tang(a - b) - al * a.norm() * tang(a - b) - al * (a.norm() - b.norm()) * tang(b);
        CHECK((g1[v] - g2[v] - split).norm() <= 1e-13 * (1.0 + split.norm()));
        CHECK(std::abs(g1[v].dot(n)) <= 1e-14);
    }
}

TEST_CASE("Volterra iteration matches the monolithic solve") {
    const Problem& pb = coarse();
    const CoupledOperator& op = *pb.op;
    const FluidSpace& s = *pb.space;
    const int steps = 10;
    const double dt = 0.01;
    const ViscosityModel m = ViscosityModel::carreau(2.0, 3.0);
    const VecX zref = admissible(pb, 21, 0.05);
    std::vector<SpMat> visc;
    for (int n = 1; n <= steps; ++n) {
        const VecX u = std::exp(-n * dt) * s.to_raw(zref);
        visc.push_back(SpMat(s.T().transpose() * assemble_tangent(s, m, u) * s.T()));
    }
    const LinearEvolution ev(op, dt, visc);
    const std::vector<VecX> loads(steps, VecX::Zero(op.nz()));
    const std::vector<VecX> lifts(steps);

    LinearEvolution::VolterraLog log0;
    const Trajectory t0 = ev.solve_volterra(VecX::Zero(op.nz()), loads, lifts, 1e-12, 50, &log0);
    for (const VecX& z : t0.z) CHECK(z.norm() == 0.0);

    const VecX z0 = admissible(pb, 22, 0.1);
    const Trajectory mono = ev.solve_monolithic(z0, loads, lifts);
    LinearEvolution::VolterraLog log;
    const Trajectory vol = ev.solve_volterra(z0, loads, lifts, 1e-13, 100, &log);
    CHECK(log.converged);
    REQUIRE(vol.levels() == mono.levels());
    for (int n = 0; n < mono.levels(); ++n)
        CHECK((vol.z[n] - mono.z[n]).norm() <= 1e-7 * z0.norm());
    // past the horizon length the corrections shrink geometrically
    REQUIRE(log.ratios.size() > static_cast<size_t>(steps + 3));
    for (size_t k = steps; k < log.ratios.size(); ++k) CHECK(log.ratios[k] < 0.9);
}

TEST_CASE("Volterra solve reports a horizon that is too long") {
    const Problem& pb = coarse();
    const CoupledOperator& op = *pb.op;
    const FluidSpace& s = *pb.space;
    const int steps = 8;
    const double dt = 0.01;
    const VecX z0 = admissible(pb, 22, 0.1);
    const std::vector<VecX> loads(steps, VecX::Zero(op.nz()));
    const std::vector<VecX> lifts(steps);

    const VolterraResult ok = volterra_solve(op, dt, {}, z0, loads, lifts, 1e-12, 200);
    CHECK(ok.halvings == 0);
    CHECK(ok.steps == steps);
    CHECK(ok.log.converged);

    // strongly shear-thickening reference
    std::vector<SpMat> stiff;
    const VecX u = s.to_raw(admissible(pb, 21, 0.5));
    for (int n = 0; n < steps; ++n)
        stiff.push_back(SpMat(s.T().transpose() * assemble_tangent(s, ViscosityModel::carreau(2.0, 3.0), u) * s.T()));
    CHECK_THROWS_AS(volterra_solve(op, dt, stiff, z0, loads, lifts, 1e-12, 200, 2), SolverError);
}

TEST_CASE("generalized traction is frame consistent") {
    const Problem& pb = coarse();
    const FluidSpace& s = *pb.space;
    const Mat3 Q = Eigen::AngleAxisd(0.9, Vec3(1.0, -2.0, 0.5).normalized()).toRotationMatrix();
    Mesh rotated = pb.domain->mesh;
    for (Vec3& x : rotated.x) x = Q * x;
    const DomainConfig dr = domain_from_mesh(rotated);
    const FluidSpace sr(dr);

    const auto L = pb.solver->steady_lifting(random_vec(6, 61));
    VecX ur(L.raw.size());
    for (int k = 0; k < L.raw.size() / 3; ++k) ur.segment<3>(3 * k) = Q * L.raw.segment<3>(3 * k);

    const ViscosityModel m = ViscosityModel::carreau(2.0, 3.0);
    TractionForm form;
    form.kind = TractionForm::Kind::Generalized;
    form.mu_of_s = [m](double q) { return m.eval(q).mu; };
    const Moments a = traction_moments(s, L.raw, L.p, form);
    const Moments b = traction_moments(sr, ur, L.p, form);
    CHECK((b.force - Q * a.force).norm() <= 1e-10 * a.force.norm());
    CHECK((b.torque - Q * a.torque).norm() <= 1e-10 * std::max(a.torque.norm(), a.force.norm()));
}
