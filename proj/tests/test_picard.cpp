#include "slipfsi/picard.hpp"
#include "slipfsi/quadrature.hpp"

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

VecX lifted(const Problem& pb, double delta) {
    const Vec6 xi = delta * (Vec6() << 1.0, 0.5, -0.3, 0.4, 0.2, 0.6).finished();
    return pb.solver->steady_lifting(xi).z;
}

PicardSettings short_run(int steps = 10, double dt = 0.02) {
    PicardSettings st;
    st.dt = dt;
    st.steps = steps;
    st.eta = 0.5;
    st.gamma = 0.1;
    st.tol = 1e-10;
    return st;
}

FlowMap moving_map(const Problem& pb, int steps) {
    FlowMap map(*pb.domain, pb.domain->mesh.x, Vec3(0.05, 0.0, 0.02), Vec3(0.0, 0.1, 0.05));
    for (int n = 1; n <= steps; ++n) map.advance(Vec3(0.05, 0.01 * n, 0.02), Vec3(0.02 * n, 0.1, 0.05), 0.05);
    return map;
}

}  // namespace

TEST_CASE("rigid source terms") {
    CHECK((rigid_f1(2.0, Vec3::UnitX(), Vec3::UnitZ()) - Vec3(0, -2, 0)).norm() == 0.0);
    const Mat3 J = Vec3(1, 2, 3).asDiagonal();
    CHECK((rigid_f2(J, Vec3(1, 1, 1)) - Vec3(-1, 2, -1)).norm() == 0.0);
    CHECK(rigid_f1(3.0, Vec3(1, 2, 3), Vec3::Zero()).norm() == 0.0);
}

TEST_CASE("identity transform leaves only the convection defect") {
    const Problem& pb = coarse();
    const FluidSpace& s = *pb.space;
    const int nf = s.nfree();

    // P1 field without bubbles or rigid part, so the trilinear form is exact
    VecX z = random_vec(s.nz(), 3);
    z.tail<6>().setZero();
    for (int t = 0; t < s.nt(); ++t) z.segment<3>(s.free_bubble(t)).setZero();
    const VecX p = random_vec(s.np(), 4);
    const NonlinearTerms nt = nonlinear_terms(pb, MetricField::identity_field(s), z, p);

    for (F0Group g : {F0Group::Rotation, F0Group::Transport, F0Group::Viscous, F0Group::Pressure})
        CHECK(nt.groups[static_cast<int>(g)].norm() == 0.0);
    CHECK(nt.H_raw.norm() == 0.0);
    CHECK(nt.H_free.norm() == 0.0);
    CHECK(nt.F1.norm() == 0.0);
    CHECK(nt.F2.norm() == 0.0);
    CHECK(std::string(group_name(F0Group::Convection)) == "convection");

    // tested against v: int -(grad u) u . v dy
    VecX zv = random_vec(s.nz(), 5);
    zv.tail<6>().setZero();
    for (int t = 0; t < s.nt(); ++t) zv.segment<3>(s.free_bubble(t)).setZero();
    const VecX u = s.to_raw(z), v = s.to_raw(zv);
    const TetRule& rule = tet_rule(4);
    double direct = 0.0;
    for (int t = 0; t < s.nt(); ++t) {
        const TetGeom& g = s.geom(t);
        for (size_t q = 0; q < rule.xi.size(); ++q) {
            const Vec3& r = rule.xi[q];
            const std::array<double, 4> lam{1.0 - r.sum(), r.x(), r.y(), r.z()};
            direct += -6.0 * g.vol * rule.w[q] * (s.grad(u, t, lam) * s.eval(u, t, lam)).dot(s.eval(v, t, lam));
        }
    }
    const double load = zv.head(nf).dot(nt.groups[static_cast<int>(F0Group::Convection)].head(nf));
    CHECK(load == doctest::Approx(direct).epsilon(1e-12));
    CHECK(direct != 0.0);
}

TEST_CASE("lifting H has no normal trace") {
    const Problem& pb = coarse();
    const FluidSpace& s = *pb.space;
    const FlowMap map = moving_map(pb, 10);
    const VecX z = pb.solver->steady_lifting(random_vec(6, 7)).z +
                   [&] {
                       VecX w = VecX::Zero(s.nz());
                       w.head(s.nfree()) = pb.solver->helmholtz_project(random_vec(s.raw_size(), 8)).Pf_free;
                       return w;
                   }();
    const VecX u = s.to_raw(z);
    for (int n : {1, 5, 10}) {
        const NonlinearTerms nt = nonlinear_terms(pb, MetricField::from_map(s, map, n), z, VecX());
        for (int v = 0; v < s.nv(); ++v) {
            const Vec3 H = nt.H_raw.segment<3>(3 * v);
            const double scale = std::max(1.0, u.segment<3>(3 * v).norm());
            if (s.kinds()[v] == VertexKind::Solid) CHECK(std::abs(H.dot(s.normal(v))) <= 1e-8 * scale);
            if (s.kinds()[v] == VertexKind::Outer) CHECK(H.norm() <= 1e-8 * scale);
        }
    }
}

TEST_CASE("divergence of H equals the metric contraction") {
    const Problem& pb = coarse();
    FlowMap map(*pb.domain, pb.domain->mesh.x, Vec3(0.005, 0.0, 0.002), Vec3(0.0, 0.01, 0.005));
    for (int n = 1; n <= 10; ++n) map.advance(Vec3(0.005, 0.001 * n, 0.002), Vec3(0.002 * n, 0.01, 0.005), 0.05);
    const int n = map.levels() - 1;
    const Mat3 B = Mat3::Random();
    const Vec3 c(0.1, -0.2, 0.3);
    const Mat3& Q = map.Q(n);
    auto G = [&](const Vec3& y) { return Mat3(map.trace(y, n, false).J.inverse() * Q); };
    auto H = [&](const Vec3& y) { return Vec3((Mat3::Identity() - G(y)) * (c + B * y)); };
    auto div = [&](const Vec3& y, double h) {
        double d = 0.0;
        for (int j = 0; j < 3; ++j) {
            const Vec3 e = Vec3::Unit(j) * h;
            d += (H(y + e)[j] - H(y - e)[j]) / (2.0 * h);
        }
        return d;
    };
    // probe the shell where the cutoff varies
    for (const Vec3& y : {Vec3(3.4, 0.2, -0.1), Vec3(-0.4, 3.3, 0.6), Vec3(0.3, -0.8, -3.3)}) {
        const double exact = (B.array() * (Mat3::Identity() - G(y).transpose()).array()).sum();
        const double d1 = div(y, 2e-3), d2 = div(y, 1e-3);
        CHECK(std::log2(std::abs(d1 - exact) / std::abs(d2 - exact)) > 1.8);
        CHECK(std::abs((4.0 * d2 - d1) / 3.0 - exact) <= 0.1 * std::abs(d2 - exact));
        CHECK(std::abs(exact) > 1e-4);
    }
}

TEST_CASE("S-norm") {
    const Problem& pb = coarse();
    const SNorm norm(pb, 2.0);
    const int nz = pb.space->nz();
    const VecX phi = lifted(pb, 1.0);

    const double dt = 1e-3;
    const int N = 1000;
    Trajectory x, zero;
    for (int n = 0; n <= N; ++n) {
        const double t = n * dt;
        x.t.push_back(t);
        x.z.push_back(std::exp(-t) * phi);
        x.p.push_back(VecX::Zero(pb.space->np()));
        zero.t.push_back(t);
        zero.z.push_back(VecX::Zero(nz));
        zero.p.push_back(VecX::Zero(pb.space->np()));
    }
    CHECK(norm(zero, 0.5) == 0.0);
    CHECK(norm(scaled(x, 3.0), 0.5) == doctest::Approx(3.0 * norm(x, 0.5)).epsilon(1e-12));
    CHECK(norm(x, 0.7) > norm(x, 0.5));

    // e^{eta t} e^{-t} with eta = 1/2 and p = 2: int_0^1 e^{-t} dt
    const SpMat& MM = pb.op->MM();
    const SpMat& A = pb.blocks->A;
    Eigen::SimplicialLDLT<SpMat> mm(MM);
    const VecX Aphi = A * phi;
    const double m2 = phi.dot(MM * phi);
    const double s0 = std::sqrt(m2 + phi.dot(Aphi) + Aphi.dot(mm.solve(Aphi)));
    const double time = std::sqrt(1.0 - std::exp(-1.0));
    const auto c = norm.components(x, 0.5);
    CHECK(c.strong == doctest::Approx(s0 * time).epsilon(1e-6));
    CHECK(c.evolution == doctest::Approx(std::sqrt(2.0 * m2) * time).epsilon(2e-3));
    const int nf = pb.space->nfree();
    CHECK(c.l == doctest::Approx(std::sqrt(2.0) * phi.segment<3>(nf).norm() * time).epsilon(2e-3));
    CHECK(c.omega == doctest::Approx(std::sqrt(2.0) * phi.tail<3>().norm() * time).epsilon(2e-3));
    CHECK(c.pressure == 0.0);
    CHECK(c.total() == doctest::Approx(norm(x, 0.5)));
}

TEST_CASE("contraction radius") {
    const DomainConfig d = make_reference_geometry(1.0, 4.0, 0);
    CHECK(gamma0(d, 0.5, 2.0) == doctest::Approx(0.5).epsilon(1e-12));
    // C = (1/(p' eta))^{1/p'} with p = 3, p' = 3/2
    const double C = std::pow(1.0 / (1.5 * 0.2), 1.0 / 1.5);
    CHECK(gamma0(d, 0.2, 3.0) == doctest::Approx(std::min(1.0, 3.0 / (2.0 * C * 3.0))).epsilon(1e-12));
    CHECK(gamma0(d, 100.0, 2.0) == 1.0);
}

TEST_CASE("zero data is a fixed point after one iteration") {
    const Problem& pb = coarse();
    const FixedPointResult r = fixed_point_solve(pb, short_run(), VecX::Zero(pb.space->nz()));
    CHECK(r.log.converged);
    CHECK(r.log.iterations == 1);
    for (const VecX& z : r.traj.z) CHECK(z.norm() == 0.0);
    const SimulationResult sim = simulate(pb, short_run(), VecX::Zero(pb.space->nz()));
    CHECK(sim.status == RunStatus::Global);
    CHECK(sim.min_distance == doctest::Approx(3.0));
}

TEST_CASE("small data contract with trends in the data size") {
    const Problem& pb = coarse();
    const PicardSettings st = short_run();
    const FixedPointResult a = fixed_point_solve(pb, st, lifted(pb, 1e-3));
    const FixedPointResult b = fixed_point_solve(pb, st, lifted(pb, 5e-4));
    for (const auto* r : {&a, &b}) {
        CHECK(r->log.converged);
        CHECK(r->log.gate_ok);
        for (double q : r->log.ratios) CHECK(q < 1.0);
    }
    CHECK(a.log.lipschitz / b.log.lipschitz == doctest::Approx(2.0).epsilon(0.3));
    CHECK(a.log.first_rhs_norm / b.log.first_rhs_norm == doctest::Approx(4.0).epsilon(0.3));
    // gate monotonicity
    CHECK(b.log.iterations <= a.log.iterations);
}

TEST_CASE("converged fixed point reproduces itself") {
    const Problem& pb = coarse();
    const FluidSpace& s = *pb.space;
    const PicardSettings st = short_run();
    const VecX z0 = lifted(pb, 1e-3);
    const FixedPointResult r = fixed_point_solve(pb, st, z0);
    REQUIRE(r.log.converged);

    const Trajectory& x = r.traj;
    const FlowMap map = FlowMap::build(*pb.domain, pb.domain->mesh.x, x.body(s.nfree()), st.flow);
    const LinearStepper stepper(*pb.op, st.dt);
    Trajectory y;
    y.t.push_back(0.0);
    y.z.push_back(z0);
    y.p.push_back(VecX::Zero(s.np()));
    for (int n = 1; n <= st.steps; ++n) {
        const NonlinearTerms nt = nonlinear_terms(pb, MetricField::from_map(s, map, n), x.z[n], x.p[n]);
        auto step = stepper.step(y.z.back(), nt.load(s), nt.H_free);
        y.t.push_back(n * st.dt);
        y.z.push_back(step.z);
        y.p.push_back(step.p);
    }
    y.p[0] = y.p[1];
    const SNorm norm(pb, st.p);
    CHECK(norm(difference(y, x), st.eta) <= 2.0 * st.tol * norm(x, st.eta));
}

TEST_CASE("the smallness gate rejects large data") {
    const Problem& pb = coarse();
    PicardSettings st = short_run();
    CHECK_THROWS_AS(fixed_point_solve(pb, st, lifted(pb, 1.0)), NonContractionError);
    try {
        fixed_point_solve(pb, st, lifted(pb, 1.0));
    } catch (const NonContractionError& e) {
        CHECK_FALSE(e.log().gate_ok);
        CHECK(e.log().norms.front() > 0.5 * e.log().gamma);
    }
}

TEST_CASE("small Newtonian data run globally") {
    const Problem& pb = coarse();
    const PicardSettings st = short_run(30, 0.02);
    const SimulationResult r = simulate(pb, st, lifted(pb, 5e-4));
    CHECK(r.status == RunStatus::Global);
    CHECK(r.log.converged);
    CHECK(r.min_distance >= 0.5 * pb.domain->beta);
    REQUIRE(r.decay);
    CHECK(r.decay->eta > 0.0);
    CHECK(r.energy.back() < r.energy.front());
    CHECK(r.traj.levels() == 31);
}

TEST_CASE("large translation toward the wall ends in contact") {
    const Problem& pb = coarse();
    PicardSettings st = short_run(50, 0.02);
    st.gate = false;
    st.eta = 0.5;
    const double speed = 20.0;
    const VecX z0 = pb.solver->steady_lifting((Vec6() << speed, 0, 0, 0, 0, 0).finished()).z;
    const SimulationResult r = simulate(pb, st, z0);
    CHECK(r.status == RunStatus::Contact);
    // the body cannot cover the clearance beta/2 faster than its initial speed allows
    CHECK(r.t_contact >= 0.5 * pb.domain->beta / speed);
    CHECK(r.t_contact < st.steps * st.dt);
    const int hit = first_contact_level(*pb.domain, r.traj.body(pb.space->nfree()), st.flow);
    CHECK(hit >= 0);
}
