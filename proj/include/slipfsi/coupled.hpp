#pragma once

#include "slipfsi/stokes.hpp"

#include <memory>

namespace slipfsi {

using CVec6 = Eigen::Matrix<Cplx, 6, 1>;

/// Linearized fluid-structure operator on the fixed reference domain.
///
/// Unknowns z = (free fluid coordinates, xi = (l, omega)). The coupled mass
/// matrix is MM = Mu + diag(0, I_mom) and the stiffness AA = A (viscous plus
/// slip). A divergence-free z splits as z = (w, 0) + G xi, where G xi is the
/// kinetic-energy-minimizing (potential) flow carrying the rigid normal trace
/// and w has zero normal trace. In these variables
///   w' = A_h (w - PS xi) + P f,   xi' = K^{-1} (C1 w + C2 xi + g~)
/// with K = I_mom + M_add.
class CoupledOperator {
public:
    CoupledOperator(std::shared_ptr<const StokesSolver> solver, const RigidBody& body);

    const StokesSolver& solver() const { return *solver_; }
    const StokesBlocks& blocks() const { return solver_->blocks(); }
    const FluidSpace& space() const { return *blocks().space; }
    const RigidBody& body() const { return body_; }
    int nf() const { return blocks().nf(); }
    int nz() const { return blocks().nz(); }

    const Mat6& momentum() const { return I_; }
    const Mat6& added_mass() const { return M_; }
    const Mat6& K() const { return K_; }
    double K_condition() const;
    /// Columns G e_k in z coordinates.
    const MatX& potential_columns() const { return G_; }
    /// Free part of PS e_k = S e_k - G e_k.
    const MatX& PS() const { return PS_; }
    const MatX& C1() const { return C1_; }
    const Mat6& C2() const { return C2_; }
    const SpMat& MM() const { return MM_; }
    const SpMat& AA() const { return blocks().A; }

    /// Added mass from P1 Neumann potentials, m_ij = int grad phi_i . grad phi_j
    /// with phi_k = N_S(k-th rigid normal flux).
    Mat6 added_mass_neumann() const;

    /// A_h v: discrete Stokes operator on divergence-free fields with zero
    /// normal trace, as a mass-Riesz representer.
    VecX stokes_apply(const VecX& v_free) const;
    /// Action of the block operator on (w, xi).
    std::pair<VecX, Vec6> apply(const VecX& w, const Vec6& xi) const;

    VecX to_z(const VecX& w, const Vec6& xi) const;
    std::pair<VecX, Vec6> split(const VecX& z) const;

    /// Weak load T^T M f + (0, g).
    VecX load(const VecX& f_raw, const Vec6& g) const;
    /// Rigid-row data seen by the structure equations, g + G^T (T^T M f).
    Vec6 rigid_data(const VecX& load_z) const;

    /// Pressure with zero mean from the fluid rows of
    /// MM z' + AA z + B^T p = load, given the rigid acceleration xi_rate.
    VecX reconstruct_pressure(const VecX& z, const Vec6& xi_rate, const VecX& load_z) const;

    double energy(const VecX& z) const { return 0.5 * z.dot(MM_ * z); }
    double viscous_dissipation(const VecX& z) const;
    double slip_dissipation(const VecX& z) const { return z.dot(blocks().Aslip * z); }

private:
    std::shared_ptr<const StokesSolver> solver_;
    RigidBody body_;
    Mat6 I_, M_, K_, C2_;
    MatX G_, PS_, C1_;
    SpMat MM_;
    Eigen::PartialPivLU<Mat6> K_lu_;
};

struct ResolventSolution {
    CVecX z;   // full coordinates
    CVecX w;   // divergence-free part with zero normal trace
    CVec6 xi;
    CVecX p;
};

/// (lambda - A_FS) applied through the pressure-free block form.
ResolventSolution solve_resolvent_block(const CoupledOperator& op, Cplx lambda, const CVecX& f_raw, const CVec6& g);
/// Same data through the primitive saddle system
///   (lambda MM + AA) z + B^T p = T^T M f + (0, g),  B z = 0.
ResolventSolution solve_resolvent_primitive(const CoupledOperator& op, Cplx lambda, const CVecX& f_raw,
                                            const CVec6& g);

/// Implicit Euler for MM z' + AA z + B^T p = load with B z = B H.
class LinearStepper {
public:
    LinearStepper(const CoupledOperator& op, double dt);

    struct Step {
        VecX z;
        VecX p;
    };
    /// `H_free` is the divergence lifting at the new time level in free
    /// coordinates (zero normal trace); pass an empty vector for none.
    Step step(const VecX& z, const VecX& load_z, const VecX& H_free = VecX()) const;
    /// Same, with the lifting given as a raw field; throws std::invalid_argument
    /// if it does not vanish on OUTER or has a normal trace on SOLID.
    Step step_raw_lift(const VecX& z, const VecX& load_z, const VecX& h_raw) const;

    double dt() const { return dt_; }
    const CoupledOperator& op() const { return *op_; }

private:
    const CoupledOperator* op_;
    double dt_;
    SpMat S_;
    RealSaddle saddle_;
};

}  // namespace slipfsi
