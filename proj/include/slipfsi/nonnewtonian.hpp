#pragma once

#include "slipfsi/coupled.hpp"
#include "slipfsi/transform.hpp"

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace slipfsi {

class SingularViscosityError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Generalized viscosity mu(s), s = |Du|^2, for the stress mu(|Du|^2) Du - pi I.
struct ViscosityModel {
    enum class Kind { Newtonian, Carreau, PowerLaw };
    Kind kind = Kind::Newtonian;
    double mu0 = 2.0;
    double d = 2.0;

    struct Value {
        double mu = 0.0;
        double mu_prime = 0.0;
        bool elliptic = true;  // mu > 0 and mu + 2 s mu' > 0
    };

    static ViscosityModel newtonian(double mu0) { return {Kind::Newtonian, mu0, 2.0}; }
    static ViscosityModel carreau(double mu0, double d) { return {Kind::Carreau, mu0, d}; }
    static ViscosityModel power_law(double mu0, double d) { return {Kind::PowerLaw, mu0, d}; }

    /// Throws std::invalid_argument for s < 0 and SingularViscosityError for
    /// the pure power law at s = 0 with d < 2.
    Value eval(double s) const;
    bool is_newtonian() const { return kind == Kind::Newtonian; }
    /// True when mu' vanishes identically (Newtonian, or d = 2).
    bool constant() const { return kind == Kind::Newtonian || d == 2.0; }
    void validate() const;
};

const char* kind_name(ViscosityModel::Kind k);
ViscosityModel::Kind parse_viscosity_kind(const std::string& s);

/// a[i][j][k][l] = a^{kl}_{ij} = 1/2 mu (d_ik d_jl + d_il d_jk) + 2 mu' D_ij D_kl.
struct QuasiLinearCoefficients {
    double a[3][3][3][3];
    double operator()(int i, int j, int k, int l) const { return a[i][j][k][l]; }
};

QuasiLinearCoefficients coefficients(const ViscosityModel& m, const Mat3& D);

/// sum a^{kl}_{ij} xi_j xi_k eta_i eta_l.
double legendre_hadamard(const QuasiLinearCoefficients& a, const Vec3& xi, const Vec3& eta);

struct EllipticityReport {
    double min_value = 0.0;  // min of the form over unit xi, eta
    int samples = 0;
    bool positive = false;
};

/// Legendre-Hadamard form on random unit (xi, eta) pairs, each paired with a
/// random symmetric D whose |D|^2 is log-spread over [1e-4, 1e2].
EllipticityReport sample_legendre_hadamard(const ViscosityModel& m, int samples, unsigned seed = 11);

/// (A(u) w)_i = sum a^{kl}_{ij} d_j d_k w_l with d2w[l](j,k) = d2 w_l / dy_j dy_k.
Vec3 contract_second_derivatives(const QuasiLinearCoefficients& a, const Tensor3& d2w);

/// Metric data of the change of variables on the vertices at one time level:
/// G = J_Y Q and b = J_Y dX/dt, both evaluated at X(y_v, t).
struct MetricField {
    std::vector<Mat3> G;
    std::vector<Vec3> b;
    std::vector<char> tet_identity;  // G = I on every vertex of the tet
    bool identity = true;

    static MetricField from_map(const FluidSpace& s, const FlowMap& map, int n);
    static MetricField identity_field(const FluidSpace& s);
    void classify(const FluidSpace& s);
};

/// Body-frame transformed symmetric gradient sym(grad u~ G). The spatial
/// symmetric gradient of the pushed-forward field is Q (this) Q^T.
inline Mat3 transformed_sym_gradient(const Mat3& grad_u, const Mat3& G) {
    const Mat3 g = grad_u * G;
    return 0.5 * (g + g.transpose());
}

/// Raw weak action int mu(|D~|^2) D~ : (grad v G) dy of the transformed
/// generalized viscous operator (metric may be the identity field).
VecX viscous_action(const FluidSpace& s, const ViscosityModel& m, const MetricField& metric, const VecX& u_raw);

/// Raw matrix of the frozen tangent int a^{kl}_{ij}(D u*) d_l u_k d_j v_i dy.
SpMat assemble_tangent(const FluidSpace& s, const ViscosityModel& m, const VecX& ustar_raw);

/// Raw weak form of Q(u*, u^) = A_* u^ - A(u* + u^)(u* + u^), reference frame.
VecX constitutive_remainder(const FluidSpace& s, const ViscosityModel& m, const SpMat& tangent_raw,
                            const VecX& ustar_raw, const VecX& uhat_raw);

/// Time levels of a coupled trajectory in z coordinates.
struct Trajectory {
    std::vector<double> t;
    std::vector<VecX> z;
    std::vector<VecX> p;

    int levels() const { return static_cast<int>(t.size()); }
    double dt() const { return t.size() > 1 ? t[1] - t[0] : 0.0; }
    BodyHistory body(int nf) const;
};

/// Linear Newtonian reference problem with initial data z0 on N steps of dt.
Trajectory newtonian_reference(const CoupledOperator& op, const VecX& z0, double dt, int steps);

/// Splits a weak load (z coordinates) into interior fluid rows, SOLID
/// tangential rows and the rigid rows (force, torque).
struct RemainderTerms {
    VecX G0;   // free rows of interior vertices and bubbles
    VecX H1;   // free rows of SOLID vertices (tangential components)
    Vec3 G1 = Vec3::Zero();
    Vec3 G2 = Vec3::Zero();

    VecX assemble(const FluidSpace& s) const;
};
RemainderTerms split_rows(const FluidSpace& s, const VecX& load_z);

/// Remainder load of the perturbation equation at one level:
///   A_* u^ + A_N u* - A~(u* + u^)(u* + u^)
/// with A_N the Newtonian operator of viscosity mu_ref (stress 2 mu_ref D),
/// A~ the transformed generalized operator, all in weak form, plus the rigid
/// terms -m w x l and J w x w of the full rigid velocity.
RemainderTerms remainder_terms(const FluidSpace& s, const ViscosityModel& m, const MetricField& metric,
                               const SpMat& tangent_raw, double mu_ref, const VecX& ustar_z, const VecX& uhat_z,
                               const RigidBody& body);

/// Boundary data alpha (1 - |u|) u_tau at each SOLID vertex (3-vectors, zero
/// elsewhere) for the nonlinear wall law.
std::vector<Vec3> nonlinear_slip_rhs(const FluidSpace& s, const VecX& u_raw);
/// Weak load sum_SOLID alpha_v w_v g_v . (v - v_S)_tau in z coordinates.
VecX slip_load(const FluidSpace& s, const std::vector<Vec3>& g);

/// Implicit Euler for MM z' + (A_n + Aslip) z + B^T p = load_n, B z = B H_n,
/// with a viscous matrix A_n (z coordinates, no slip part) per level.
class LinearEvolution {
public:
    /// `viscous` holds A_1..A_N; an empty vector uses the Newtonian blocks.
    LinearEvolution(const CoupledOperator& op, double dt, std::vector<SpMat> viscous);

    int steps() const { return steps_; }
    double dt() const { return dt_; }

    /// loads[n-1], lifts[n-1] for n = 1..N (empty lifts mean none).
    Trajectory solve_monolithic(const VecX& z0, const std::vector<VecX>& loads,
                                const std::vector<VecX>& lifts) const;

    struct VolterraLog {
        std::vector<double> corrections;  // max-norm change of the rigid history
        std::vector<double> ratios;
        int iterations = 0;
        bool converged = false;
    };
    /// Same system with the fluid solved for prescribed rigid velocities and
    /// the rigid history updated by successive substitution through the
    /// fluid reaction. Throws SolverError when the corrections grow.
    Trajectory solve_volterra(const VecX& z0, const std::vector<VecX>& loads, const std::vector<VecX>& lifts,
                              double tol, int max_iter, VolterraLog* log = nullptr) const;

private:
    const SpMat& stiffness(int n) const;
    const RealSaddle& full_saddle(int n) const;
    const RealSaddle& fluid_saddle(int n) const;

    const CoupledOperator* op_;
    double dt_;
    int steps_;
    std::vector<SpMat> S_;  // MM/dt + A_n + Aslip
    mutable std::vector<std::unique_ptr<RealSaddle>> full_, fluid_;
};

/// Monolithic or Volterra solve of the linear problem with a frozen tangent
/// per level. When T is too long for the Volterra iteration to contract the
/// horizon is halved, down to `min_steps`; the returned trajectory then
/// covers the shortened horizon.
struct VolterraResult {
    Trajectory traj;
    LinearEvolution::VolterraLog log;
    int steps = 0;
    int halvings = 0;
};
VolterraResult volterra_solve(const CoupledOperator& op, double dt, const std::vector<SpMat>& viscous,
                              const VecX& z0, const std::vector<VecX>& loads, const std::vector<VecX>& lifts,
                              double tol, int max_iter, int min_steps = 1);

}  // namespace slipfsi
