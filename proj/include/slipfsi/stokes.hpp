#pragma once

#include "slipfsi/geometry.hpp"
#include "slipfsi/linalg.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace slipfsi {

/// Affine data of one tetrahedron.
struct TetGeom {
    std::array<Vec3, 4> glam;  // gradients of the barycentric coordinates
    double vol = 0.0;
    Vec3 x0;
    Mat3 Jm;  // columns x1-x0, x2-x0, x3-x0
};

/// MINI velocity (P1 + cubic bubble, vector valued) and P1 pressure on the
/// reference fluid mesh.
///
/// Raw velocity dofs: 3 per vertex then 3 per tet (bubble). The constrained
/// coordinates z = (free, xi) hold interior vertex components, two tangential
/// components at SOLID vertices, bubble components, and the rigid velocity
/// xi = (l, omega). OUTER vertices carry no dofs; at SOLID vertex i the normal
/// component equals n_i . (l + omega x y_i).
class FluidSpace {
public:
    explicit FluidSpace(const DomainConfig& domain, bool analytic_normals = true);

    const DomainConfig& domain() const { return *domain_; }
    const Mesh& mesh() const { return domain_->mesh; }
    int nv() const { return nv_; }
    int nt() const { return nt_; }
    int raw_size() const { return 3 * (nv_ + nt_); }
    int nfree() const { return nfree_; }
    int nz() const { return nfree_ + 6; }
    int np() const { return nv_; }
    int raw_vertex(int v, int c) const { return 3 * v + c; }
    int raw_bubble(int t, int c) const { return 3 * nv_ + 3 * t + c; }
    int raw_local(int t, int a, int c) const {
        return a < 4 ? raw_vertex(mesh().tets[t][a], c) : raw_bubble(t, c);
    }

    const std::vector<VertexKind>& kinds() const { return kinds_; }
    const std::vector<int>& solid_vertices() const { return solid_; }
    /// Index into solid_vertices() for a vertex, or -1.
    int solid_index(int v) const { return solid_index_[v]; }
    /// Normal out of the fluid (into the body) at SOLID vertices.
    const Vec3& normal(int v) const { return normal_[v]; }
    const Vec3& tangent1(int v) const { return t1_[v]; }
    const Vec3& tangent2(int v) const { return t2_[v]; }
    /// Lumped boundary weight int phi_v dS over the vertex's tagged boundary.
    double boundary_weight(int v) const { return bweight_[v]; }
    /// Lever arm y = x - center of the solid.
    Vec3 lever(int v) const { return mesh().x[v] - domain().solid.center; }
    /// Row N_v with normal velocity n_v . (l + omega x y_v) = N_v xi.
    Vec6 normal_row(int v) const;
    /// Matrix L_v with l + omega x y_v = L_v xi.
    Eigen::Matrix<double, 3, 6> rigid_map(int v) const;
    /// First free index of vertex v (or -1 for OUTER vertices).
    int free_vertex(int v) const { return free_vertex_[v]; }
    int free_bubble(int t) const { return free_bubble_ + 3 * t; }

    const TetGeom& geom(int t) const { return geom_[t]; }
    /// Tet owning boundary facet f.
    int facet_tet(int f) const { return facet_tet_[f]; }
    /// Barycentric coordinates in tet t of a point on that tet's face.
    std::array<double, 4> barycentric(int t, const Vec3& x) const;

    /// raw = T z.
    const SpMat& T() const { return T_; }
    VecX to_raw(const VecX& z) const { return T_ * z; }
    /// Free coordinates of a raw field in V_0 (zero on OUTER, zero normal
    /// trace on SOLID). Throws if the raw field violates either condition by
    /// more than `tol` times its max-norm.
    VecX free_from_raw(const VecX& raw, double tol = 1e-8) const;
    /// Raw rigid field l + omega x y sampled at every velocity dof
    /// (bubble coefficients zero).
    VecX rigid_raw(const Vec6& xi) const;

    /// Evaluate a raw field at barycentric coordinates of tet t.
    Vec3 eval(const VecX& raw, int t, const std::array<double, 4>& lambda) const;
    /// Velocity gradient (du_i/dx_j) at barycentric coordinates of tet t.
    Mat3 grad(const VecX& raw, int t, const std::array<double, 4>& lambda) const;

private:
    std::shared_ptr<const DomainConfig> domain_;
    int nv_ = 0, nt_ = 0, nfree_ = 0, free_bubble_ = 0;
    std::vector<VertexKind> kinds_;
    std::vector<int> solid_, solid_index_, free_vertex_;
    std::vector<Vec3> normal_, t1_, t2_;
    std::vector<double> bweight_;
    std::vector<TetGeom> geom_;
    std::vector<int> facet_tet_;
    SpMat T_;
};

/// Assembled Stokes blocks. Raw blocks act on raw velocity dofs; z blocks
/// act on constrained coordinates.
struct StokesBlocks {
    std::shared_ptr<const FluidSpace> space;
    double mu = 1.0;
    SpMat M_raw;   // velocity mass
    SpMat A_raw;   // 2 mu int D u : D v
    SpMat B_raw;   // b(v, q) = int grad q . v - sum_SOLID w_i q_i v_i . n_i
    SpMat Mu;      // T^T M_raw T
    SpMat Aslip;   // sum_SOLID alpha_i w_i |u_i - L_i xi|^2 in z coordinates
    SpMat A;       // T^T A_raw T + Aslip
    SpMat B;       // B_raw T
    SpMat L_p1;    // P1 Laplacian on the pressure space
    VecX gauge;    // int phi_j for the pressure basis

    int nf() const { return space->nfree(); }
    int nz() const { return space->nz(); }
    SpMat free_block(const SpMat& Z) const;  // top-left nf x nf
    SpMat B_free() const;                    // B restricted to free columns
};

/// Assemble with viscosity mu (stress 2 mu D u - pi I). `alpha_override`
/// replaces the domain's friction field when given.
StokesBlocks assemble_stokes(std::shared_ptr<const FluidSpace> space, double mu,
                             const std::optional<std::vector<double>>& alpha_override = std::nullopt);
StokesBlocks assemble_stokes(const DomainConfig& domain, double mu);

/// Viscous bilinear form value 2 mu int |D u|^2 by direct quadrature (no
/// precomputed element tensors); used to cross-check the assembled matrix.
double viscous_energy_quadrature(const FluidSpace& s, const VecX& raw, double mu);

/// Factorizations reused by every projection, lifting and potential solve.
class StokesSolver {
public:
    explicit StokesSolver(std::shared_ptr<const StokesBlocks> blocks);

    const StokesBlocks& blocks() const { return *blocks_; }
    std::shared_ptr<const StokesBlocks> blocks_ptr() const { return blocks_; }

    /// [M_ff B0^T; B0 0] (y, p) = (f, g) with zero-mean p.
    std::pair<VecX, VecX> mass_solve(const VecX& f, const VecX& g) const { return mass_saddle_.solve(f, g); }
    /// [A_ff B0^T; B0 0] (y, p) = (f, g) with zero-mean p.
    std::pair<VecX, VecX> steady_solve(const VecX& f, const VecX& g) const { return steady_saddle_.solve(f, g); }

    struct Projection {
        VecX Pf_free;   // free coordinates of Pf (xi = 0)
        VecX Pf_raw;
        VecX grad_raw;  // f - Pf
        VecX potential;
    };
    /// Mass-orthogonal projection onto discretely divergence-free fields with
    /// zero normal trace.
    Projection helmholtz_project(const VecX& f_raw) const;
    /// Same projection for a load (already tested against the free basis).
    std::pair<VecX, VecX> project_load(const VecX& load_free) const;
    /// Pressure potential of a free-row residual r: solves M y + B0^T p = r,
    /// B0 y = 0 and returns p.
    VecX potential(const VecX& r_free) const;

    struct Lift {
        VecX z;
        VecX raw;
        VecX p;
    };
    /// Steady Stokes flow with normal data (l + omega x y).n and the slip
    /// condition on SOLID, u = 0 on OUTER.
    Lift steady_lifting(const Vec6& xi) const;
    /// Columns S(e_k), k = 0..5, in z coordinates.
    const MatX& lifting_columns() const { return S_cols_; }

    /// Discrete harmonic P1 field with lumped boundary flux. `flux` holds one
    /// value per vertex; interior entries are ignored, OUTER entries are
    /// ignored when restrict_to_solid is set.
    VecX solve_neumann(const VecX& flux, bool restrict_to_solid, double tol = 1e-10) const;

private:
    std::shared_ptr<const StokesBlocks> blocks_;
    SpMat B0_;
    RealSaddle mass_saddle_;
    RealSaddle steady_saddle_;
    SpMat lap_matrix_;
    Eigen::UmfPackLU<SpMat> lap_;
    MatX S_cols_;
};

class CompatibilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stress selection for traction integrals.
struct TractionForm {
    enum class Kind { Newtonian, Generalized } kind = Kind::Newtonian;
    double mu = 1.0;                       // Newtonian: sigma = 2 mu D u - pi I
    std::function<double(double)> mu_of_s;  // Generalized: T = mu(|Du|^2) D u - pi I
};

struct Moments {
    Vec3 force = Vec3::Zero();
    Vec3 torque = Vec3::Zero();
};

/// Surface quadrature of (stress) n and y x (stress) n over SOLID facets,
/// n pointing out of the fluid.
Moments traction_moments(const FluidSpace& s, const VecX& u_raw, const VecX& p, const TractionForm& form);
/// Same with a pressure given as a function of position (velocity from raw).
Moments traction_moments(const FluidSpace& s, const VecX& u_raw, const std::function<double(const Vec3&)>& p,
                         const TractionForm& form);

struct CompatibilityReport {
    bool ok = true;
    double divergence = 0.0;     // ||B u0|| relative to ||u0||
    double outer_trace = 0.0;    // max |u0| at OUTER vertices
    double normal_trace = 0.0;   // max |u0.n - (l0 + w0 x y).n| at SOLID vertices
    double slip_trace = -1.0;    // weak tangential residual, only when p > 3
    std::vector<int> outer_facets;
    std::vector<std::string> violations;
};

CompatibilityReport check_compatibility(const StokesSolver& solver, const VecX& u0_raw, const Vec3& l0,
                                        const Vec3& omega0, double p_exponent, double tol = 1e-8);

}  // namespace slipfsi
