#include "slipfsi/coupled.hpp"
#include "slipfsi/picard.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace slipfsi;

namespace {

constexpr double kPi = 3.14159265358979323846;

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

CVecX random_cvec(int n, unsigned seed) { return make_complex(random_vec(n, seed), random_vec(n, seed + 1000)); }

double energy_norm(const CoupledOperator& op, const CVecX& z) {
    return std::sqrt(std::abs(z.dot(op.MM().cast<Cplx>() * z)));
}

/// Divergence-free z with random fluid and rigid parts.
VecX admissible(const Problem& pb, unsigned seed) {
    const VecX w = pb.solver->helmholtz_project(random_vec(pb.space->raw_size(), seed)).Pf_free;
    return pb.op->to_z(w, random_vec(6, seed + 7));
}

}  // namespace

TEST_CASE("added mass is symmetric, semi-definite and blind to rotations of a centered sphere") {
    const CoupledOperator& op = *coarse().op;
    const Mat6& M = op.added_mass();
    CHECK((M - M.transpose()).norm() <= 1e-10 * M.norm());
    Eigen::SelfAdjointEigenSolver<Mat6> es(M);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    CHECK(M.rightCols<3>().cwiseAbs().maxCoeff() <= 1e-8 * M.norm());
    CHECK(M.bottomRows<3>().cwiseAbs().maxCoeff() <= 1e-8 * M.norm());
    CHECK(std::abs(op.K().determinant()) > 0.0);
    CHECK(op.K_condition() >= 1.0);
    CHECK(std::isfinite(op.K_condition()));
}

TEST_CASE("translational added mass approaches the classical sphere value") {
    const double classical = 2.0 * kPi / 3.0;
    const Problem desk = Problem::create(make_reference_geometry(1.0, 4.0, 1), 2.0, 1.0);
    const Problem fine = Problem::create(make_reference_geometry(1.0, 4.0, 2), 2.0, 1.0);
    const Mat3 Tc = desk.op->added_mass().topLeftCorner<3, 3>();
    const Mat3 Tf = fine.op->added_mass().topLeftCorner<3, 3>();
    for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(Tc(k, k) - Tf(k, k)) / Tf(k, k) < 0.15);
        CHECK(std::abs(Tf(k, k) - classical) / classical < 0.15);
    }
    const Mat3 off = Tf - Mat3(Tf.diagonal().asDiagonal());
    CHECK(off.cwiseAbs().maxCoeff() <= 0.05 * Tf.diagonal().minCoeff());
}

TEST_CASE("block action separates fluid and rigid parts") {
    const CoupledOperator& op = *coarse().op;
    const VecX w = coarse().solver->helmholtz_project(random_vec(op.space().raw_size(), 3)).Pf_free;
    const Vec6 xi = random_vec(6, 4);

    const auto [fw, rw] = op.apply(w, Vec6::Zero());
    CHECK((fw - op.stokes_apply(w)).norm() <= 1e-12 * fw.norm());
    CHECK((rw - op.K().partialPivLu().solve(op.C1() * w)).norm() <= 1e-10 * rw.norm());

    const auto [fx, rx] = op.apply(VecX::Zero(op.nf()), xi);
    CHECK((fx + op.stokes_apply(op.PS() * xi)).norm() <= 1e-12 * fx.norm());
    CHECK((rx - op.K().partialPivLu().solve(op.C2() * xi)).norm() <= 1e-10 * rx.norm());

    const VecX z = op.to_z(w, xi);
    const auto [w2, xi2] = op.split(z);
    CHECK((w2 - w).norm() <= 1e-12 * w.norm());
    CHECK((xi2 - xi).norm() == 0.0);
    CHECK((op.blocks().B * z).norm() <= 1e-10 * z.norm());
}

TEST_CASE("block and primitive resolvent solves agree") {
    const CoupledOperator& op = *coarse().op;
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int k = 0; k < 6; ++k) {
        const Cplx lambda(5.0 * U(rng), 10.0 * (U(rng) - 0.5));
        const CVecX f = random_cvec(op.space().raw_size(), 50 + k);
        const CVec6 g = random_cvec(6, 60 + k);
        const ResolventSolution a = solve_resolvent_block(op, lambda, f, g);
        const ResolventSolution b = solve_resolvent_primitive(op, lambda, f, g);
        const double scale = energy_norm(op, b.z);
        CHECK(energy_norm(op, CVecX(a.z - b.z)) <= 1e-7 * scale);
        CHECK((a.xi - b.xi).norm() <= 1e-7 * std::max(b.xi.norm(), 1e-300));
        CHECK((a.p - b.p).norm() <= 1e-8 * b.p.norm());
    }
}

TEST_CASE("resolvent of zero data is zero and solves are linear") {
    const CoupledOperator& op = *coarse().op;
    const int n = op.space().raw_size();
    for (Cplx lambda : {Cplx(0.0, 0.0), Cplx(1.0, 2.0), Cplx(0.0, -3.0)}) {
        const ResolventSolution s = solve_resolvent_block(op, lambda, CVecX::Zero(n), CVec6::Zero());
        CHECK(s.z.norm() == 0.0);
        CHECK(s.p.norm() == 0.0);
    }
    const CVecX f = random_cvec(n, 71);
    const CVec6 g = random_cvec(6, 72);
    const Cplx lambda(0.5, 1.5);
    const auto s1 = solve_resolvent_block(op, lambda, f, g);
    const auto s2 = solve_resolvent_block(op, lambda, CVecX(2.0 * f), CVec6(2.0 * g));
    CHECK((s2.z - 2.0 * s1.z).norm() <= 1e-10 * s2.z.norm());
}

TEST_CASE("steady mobility problem under a unit force") {
    const CoupledOperator& op = *coarse().op;
    const StokesBlocks& b = op.blocks();
    const CVecX f = CVecX::Zero(op.space().raw_size());
    CVec6 g = CVec6::Zero();
    g[0] = 1.0;
    const ResolventSolution s = solve_resolvent_block(op, 0.0, f, g);
    VecX load = VecX::Zero(op.nz());
    load[op.nf()] = 1.0;
    const VecX z = s.z.real();
    const VecX p = s.p.real();
    const VecX r = op.AA() * z + b.B.transpose() * p - load;
    CHECK(r.norm() <= 1e-9 * load.norm());
    CHECK((b.B * z).norm() <= 1e-9 * z.norm());
    CHECK(s.z.imag().norm() == 0.0);
    // the body drifts along the force; the unstructured mesh leaves only a
    // small cross response
    CHECK(z[op.nf()] > 0.0);
    CHECK(z.tail<5>().cwiseAbs().maxCoeff() <= 0.05 * z[op.nf()]);
}

TEST_CASE("pressure reconstruction") {
    const Problem& pb = coarse();
    const CoupledOperator& op = *pb.op;
    const StokesBlocks& b = op.blocks();
    const int nz = op.nz();
    CHECK(op.reconstruct_pressure(VecX::Zero(nz), Vec6::Zero(), VecX::Zero(nz)).norm() == 0.0);

    // a planted zero-mean pressure with zero velocity is returned exactly
    VecX q = random_vec(pb.space->np(), 81);
    q.array() -= q.dot(b.gauge) / b.gauge.sum();
    const VecX load = b.B.transpose() * q;
    const VecX rec = op.reconstruct_pressure(VecX::Zero(nz), Vec6::Zero(), load);
    CHECK((rec - q).norm() <= 1e-10 * q.norm());

    const double lambda = 0.8;
    const CVecX f = random_cvec(pb.space->raw_size(), 82);
    const CVec6 g = random_cvec(6, 83);
    const auto prim =
        solve_resolvent_primitive(op, lambda, CVecX(f.real().cast<Cplx>()), CVec6(g.real().cast<Cplx>()));
    const VecX z = prim.z.real();
    const VecX rate = lambda * z.tail<6>();
    const VecX lz = op.load(f.real(), g.real());
    const VecX pr = op.reconstruct_pressure(z, Vec6(rate), lz);
    CHECK((pr - prim.p.real()).norm() <= 1e-8 * prim.p.real().norm());
}

TEST_CASE("implicit Euler steps") {
    const Problem& pb = coarse();
    const CoupledOperator& op = *pb.op;
    const LinearStepper st(op, 0.05);
    const int nz = op.nz();

    const auto zero = st.step(VecX::Zero(nz), VecX::Zero(nz));
    CHECK(zero.z.norm() == 0.0);

    const VecX z0 = admissible(pb, 91);
    const auto a = st.step(z0, VecX::Zero(nz));
    const auto b = st.step(z0, VecX::Zero(nz), VecX::Zero(op.nf()));
    CHECK((a.z - b.z).norm() <= 1e-14 * a.z.norm());

    // discrete energy identity of implicit Euler
    const VecX dz = a.z - z0;
    const double lhs = op.energy(a.z) - op.energy(z0) + op.energy(dz);
    const double rhs = -st.dt() * a.z.dot(op.AA() * a.z);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    CHECK(op.energy(a.z) < op.energy(z0));
    CHECK(op.viscous_dissipation(a.z) + op.slip_dissipation(a.z) ==
          doctest::Approx(a.z.dot(op.AA() * a.z)).epsilon(1e-12));
}

TEST_CASE("divergence lifting is added back and its boundary conditions are enforced") {
    const Problem& pb = coarse();
    const CoupledOperator& op = *pb.op;
    const FluidSpace& s = *pb.space;
    const LinearStepper st(op, 0.05);
    VecX h = VecX::Zero(s.raw_size());
    for (int t = 0; t < s.nt(); ++t) h[s.raw_bubble(t, 0)] = std::sin(0.1 * t);
    const auto r = st.step_raw_lift(VecX::Zero(op.nz()), VecX::Zero(op.nz()), h);
    VecX H = VecX::Zero(op.nz());
    H.head(op.nf()) = s.free_from_raw(h);
    const VecX Bz = op.blocks().B * r.z;
    CHECK((Bz - op.blocks().B * H).norm() <= 1e-10 * (op.blocks().B * H).norm());

    int outer = -1;
    for (int v = 0; v < s.nv() && outer < 0; ++v)
        if (s.kinds()[v] == VertexKind::Outer) outer = v;
    VecX bad = h;
    bad[3 * outer + 1] = 1.0;
    CHECK_THROWS_AS(st.step_raw_lift(VecX::Zero(op.nz()), VecX::Zero(op.nz()), bad), std::invalid_argument);
    CHECK_THROWS_AS(LinearStepper(op, 0.0), std::invalid_argument);
}

TEST_CASE("manufactured solution converges at first order in the step") {
    const Problem& pb = coarse();
    const CoupledOperator& op = *pb.op;
    const VecX za = admissible(pb, 101);
    const VecX Mz = op.MM() * za, Az = op.AA() * za;
    const double T = 1.0;
    std::vector<double> err;
    for (int n : {20, 40, 80}) {
        const double dt = T / n;
        const LinearStepper st(op, dt);
        VecX z = za;
        for (int k = 1; k <= n; ++k) {
            const double t = k * dt;
            const VecX load = -std::sin(t) * Mz + std::cos(t) * Az;
            z = st.step(z, load).z;
        }
        const VecX e = z - std::cos(T) * za;
        err.push_back(std::sqrt(2.0 * op.energy(e)) / std::sqrt(2.0 * op.energy(za)));
    }
    CHECK(std::log2(err[0] / err[1]) > 0.9);
    CHECK(std::log2(err[1] / err[2]) > 0.9);
    CHECK(err[2] < 1e-2);
}
