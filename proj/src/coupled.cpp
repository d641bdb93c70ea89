#include "slipfsi/coupled.hpp"

#include <Eigen/SVD>

namespace slipfsi {

namespace {

VecX zvec(int nz, const Vec6& xi) {
    VecX z = VecX::Zero(nz);
    z.tail<6>() = xi;
    return z;
}

/// Real saddle applied to real and imaginary parts.
template <class Solve>
std::pair<CVecX, CVecX> split_solve(Solve&& solve, const CVecX& f) {
    const std::pair<VecX, VecX> re = solve(VecX(f.real()));
    const std::pair<VecX, VecX> im = solve(VecX(f.imag()));
    return {make_complex(re.first, im.first), make_complex(re.second, im.second)};
}

}  // namespace

CoupledOperator::CoupledOperator(std::shared_ptr<const StokesSolver> solver, const RigidBody& body)
    : solver_(std::move(solver)), body_(body) {
    const StokesBlocks& b = blocks();
    const int nf = b.nf(), nz = b.nz();
    I_ = body.momentum_matrix();

    G_.resize(nz, 6);
    for (int k = 0; k < 6; ++k) {
        const VecX zx = zvec(nz, Vec6::Unit(k));
        auto [y, q] = solver_->mass_solve(-(b.Mu * zx).head(nf), -(b.B * zx));
        G_.col(k) = zx;
        G_.col(k).head(nf) = y;
    }
    M_ = G_.transpose() * (b.Mu * G_);
    K_ = I_ + M_;
    K_lu_.compute(K_);

    const MatX AG = b.A * G_;
    C1_ = -AG.topRows(nf).transpose();
    C2_ = -(G_.transpose() * AG);
    PS_ = (solver_->lifting_columns() - G_).topRows(nf);

    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 0; k < 6; ++k)
        for (int l = 0; l < 6; ++l)
            if (I_(k, l) != 0.0) trip.emplace_back(nf + k, nf + l, I_(k, l));
    SpMat D(nz, nz);
    D.setFromTriplets(trip.begin(), trip.end());
    MM_ = b.Mu + D;
}

double CoupledOperator::K_condition() const {
    Eigen::JacobiSVD<Mat6> svd(K_);
    const auto& s = svd.singularValues();
    return s(0) / s(5);
}

Mat6 CoupledOperator::added_mass_neumann() const {
    const FluidSpace& s = space();
    std::vector<VecX> phi;
    for (int k = 0; k < 6; ++k) {
        VecX flux = VecX::Zero(s.np());
        for (int v : s.solid_vertices()) flux[v] = s.normal_row(v)[k];
        phi.push_back(solver_->solve_neumann(flux, true));
    }
    Mat6 m;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) m(i, j) = phi[i].dot(blocks().L_p1 * phi[j]);
    return m;
}

VecX CoupledOperator::stokes_apply(const VecX& v) const {
    const StokesBlocks& b = blocks();
    const VecX r = -(b.free_block(b.A) * v);
    return solver_->mass_solve(r, VecX::Zero(b.B.rows())).first;
}

std::pair<VecX, Vec6> CoupledOperator::apply(const VecX& w, const Vec6& xi) const {
    const VecX fluid = stokes_apply(w - PS_ * xi);
    const Vec6 rigid = K_lu_.solve(C1_ * w + C2_ * xi);
    return {fluid, rigid};
}

VecX CoupledOperator::to_z(const VecX& w, const Vec6& xi) const {
    VecX z = G_ * xi;
    z.head(nf()) += w;
    return z;
}

std::pair<VecX, Vec6> CoupledOperator::split(const VecX& z) const {
    const Vec6 xi = z.tail<6>();
    return {z.head(nf()) - (G_ * xi).head(nf()), xi};
}

VecX CoupledOperator::load(const VecX& f_raw, const Vec6& g) const {
    VecX l = space().T().transpose() * (blocks().M_raw * f_raw);
    l.tail<6>() += g;
    return l;
}

Vec6 CoupledOperator::rigid_data(const VecX& load_z) const { return G_.transpose() * load_z; }

VecX CoupledOperator::reconstruct_pressure(const VecX& z, const Vec6& xi_rate, const VecX& load_z) const {
    const StokesBlocks& b = blocks();
    const VecX r = (load_z - b.A * z - b.Mu * (G_ * xi_rate)).head(nf());
    return solver_->potential(r);
}

double CoupledOperator::viscous_dissipation(const VecX& z) const {
    const StokesBlocks& b = blocks();
    return z.dot(b.A * z) - z.dot(b.Aslip * z);
}

ResolventSolution solve_resolvent_block(const CoupledOperator& op, Cplx lambda, const CVecX& f_raw,
                                        const CVec6& g) {
    const StokesBlocks& b = op.blocks();
    const FluidSpace& s = op.space();
    const int nf = op.nf();
    const SpMat Mff = b.free_block(b.Mu);
    const SpMat Aff = b.free_block(b.A);

    CVecX load = make_complex(s.T().transpose() * (b.M_raw * f_raw.real()),
                              s.T().transpose() * (b.M_raw * f_raw.imag()));
    load.tail<6>() += g;

    auto mass = [&](const VecX& r) { return op.solver().mass_solve(r, VecX::Zero(b.B.rows())); };
    const CVecX Pf = split_solve(mass, CVecX(load.head(nf))).first;

    const CSpMat Kl = (lambda * Mff.cast<Cplx>() + Aff.cast<Cplx>()).pruned();
    const ComplexSaddle R(Kl, b.B_free(), b.gauge);
    const CVecX W0 = R.solve(CVecX(Mff.cast<Cplx>() * Pf)).first;
    Eigen::MatrixXcd W(nf, 6);
    for (int k = 0; k < 6; ++k) W.col(k) = R.solve(CVecX((Aff * op.PS().col(k)).cast<Cplx>())).first;

    const Eigen::MatrixXcd C1 = op.C1().cast<Cplx>();
    const Eigen::Matrix<Cplx, 6, 6> lhs = lambda * op.K().cast<Cplx>() - op.C2().cast<Cplx>() - C1 * W;
    const CVec6 gt = op.potential_columns().transpose().cast<Cplx>() * load;
    const CVec6 rhs = gt + C1 * W0;

    ResolventSolution sol;
    sol.xi = lhs.partialPivLu().solve(rhs);
    sol.w = W0 + W * sol.xi;
    sol.z = op.potential_columns().cast<Cplx>() * sol.xi;
    sol.z.head(nf) += sol.w;

    const CVecX r = (load - b.A.cast<Cplx>() * sol.z -
                     lambda * (b.Mu * op.potential_columns()).cast<Cplx>() * sol.xi)
                        .head(nf);
    auto pot = [&](const VecX& x) { return std::pair<VecX, VecX>(op.solver().potential(x), VecX()); };
    sol.p = split_solve(pot, r).first;
    return sol;
}

ResolventSolution solve_resolvent_primitive(const CoupledOperator& op, Cplx lambda, const CVecX& f_raw,
                                            const CVec6& g) {
    const StokesBlocks& b = op.blocks();
    const FluidSpace& s = op.space();
    CVecX load = make_complex(s.T().transpose() * (b.M_raw * f_raw.real()),
                              s.T().transpose() * (b.M_raw * f_raw.imag()));
    load.tail<6>() += g;
    const CSpMat Kl = (lambda * op.MM().cast<Cplx>() + op.AA().cast<Cplx>()).pruned();
    const ComplexSaddle R(Kl, b.B, b.gauge);
    ResolventSolution sol;
    std::tie(sol.z, sol.p) = R.solve(load);
    sol.xi = sol.z.tail<6>();
    sol.w = sol.z.head(op.nf()) - (op.potential_columns().cast<Cplx>() * sol.xi).head(op.nf());
    return sol;
}

LinearStepper::LinearStepper(const CoupledOperator& op, double dt) : op_(&op), dt_(dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("LinearStepper: dt must be positive");
    S_ = (op.MM() / dt + op.AA()).pruned();
    saddle_.factor(S_, op.blocks().B, op.blocks().gauge);
}

LinearStepper::Step LinearStepper::step(const VecX& z, const VecX& load_z, const VecX& H_free) const {
    const CoupledOperator& op = *op_;
    VecX rhs = op.MM() * z / dt_ + load_z;
    VecX Hz;
    if (H_free.size() > 0) {
        if (H_free.size() != op.nf()) throw std::invalid_argument("step: lifting size mismatch");
        Hz = VecX::Zero(op.nz());
        Hz.head(op.nf()) = H_free;
        rhs -= S_ * Hz;
    }
    Step out;
    std::tie(out.z, out.p) = saddle_.solve(rhs, VecX::Zero(op.blocks().B.rows()));
    if (Hz.size() > 0) out.z += Hz;
    return out;
}

LinearStepper::Step LinearStepper::step_raw_lift(const VecX& z, const VecX& load_z, const VecX& h_raw) const {
    return step(z, load_z, op_->space().free_from_raw(h_raw));
}

}  // namespace slipfsi
