#pragma once

#include "slipfsi/nonnewtonian.hpp"
#include "slipfsi/spectral.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace slipfsi {

/// Everything assembled once per geometry: space, Stokes blocks with
/// viscosity mu0/2 (stress mu0 Du), solver and coupled operator.
struct Problem {
    std::shared_ptr<const DomainConfig> domain;
    std::shared_ptr<const FluidSpace> space;
    std::shared_ptr<const StokesBlocks> blocks;
    std::shared_ptr<const StokesSolver> solver;
    std::shared_ptr<const CoupledOperator> op;
    RigidBody body;
    double mu0 = 2.0;

    static Problem create(const DomainConfig& d, double mu0, double density);
};

/// Rigid-body source terms of the body-frame equations.
inline Vec3 rigid_f1(double mass, const Vec3& l, const Vec3& omega) { return -mass * omega.cross(l); }
inline Vec3 rigid_f2(const Mat3& J, const Vec3& omega) { return (J * omega).cross(omega); }

enum class F0Group { Rotation, Transport, Convection, Viscous, Pressure };
constexpr int kF0Groups = 5;
const char* group_name(F0Group g);

/// Explicit terms of the transformed system at one level, as weak loads in z
/// coordinates (rigid rows include the fluid load tested with the rigid
/// extension). F0 is split by group:
///   rotation   -omega~ x u~
///   transport  grad u~ J_Y dX/dt
///   convection -grad u~ G u~
///   viscous    a(u~, v) - int mu0 D~ : (grad v G)     (weak metric defect)
///   pressure   (I - G^T) grad pi~
/// with G = J_Y Q.
struct NonlinearTerms {
    std::array<VecX, kF0Groups> groups;
    VecX H_raw;   // (I - G) u~
    VecX H_free;
    Vec3 F1 = Vec3::Zero();
    Vec3 F2 = Vec3::Zero();

    VecX F0() const;
    /// F0 plus (F1, F2) in the rigid rows.
    VecX load(const FluidSpace& s) const;
};

struct TermOptions {
    bool viscous = true;  // include the Newtonian viscous defect
    bool rigid = true;    // include F1, F2
};

NonlinearTerms nonlinear_terms(const Problem& pb, const MetricField& metric, const VecX& z, const VecX& p,
                               const TermOptions& opt = {});

/// Wall-law data alpha (1 - |u|) u_tau - alpha (1 - |u_S|) u_S,tau on SOLID,
/// so that the linear slip operator plus this load enforces
/// [T n]_tau + alpha |u| u_tau = alpha |u_S| u_S,tau at a fixed point.
VecX wall_law_load(const FluidSpace& s, const VecX& z);

/// Discrete boundary residual of the wall law at each level: the weak
/// tangential traction from the fluid rows, combined with the law, in the
/// boundary-weighted norm. Returns the maximum over levels >= 1.
double wall_law_residual(const Problem& pb, const Trajectory& x, const FlowMap* map);

/// Discrete e^{eta t}-weighted stand-in for the norm of the solution class.
class SNorm {
public:
    explicit SNorm(const Problem& pb, double p = 2.0);

    struct Components {
        double strong = 0.0;    // (|u|_M^2 + |u|_A^2 + |A u|_{M^-1}^2)^{1/2}
        double evolution = 0.0; // (|u|_M^2 + |u_t|_M^2)^{1/2}
        double pressure = 0.0;  // |grad pi|
        double l = 0.0;         // (|l|^2 + |l'|^2)^{1/2}
        double omega = 0.0;
        double total() const { return strong + evolution + pressure + l + omega; }
    };
    Components components(const Trajectory& x, double eta) const;
    double operator()(const Trajectory& x, double eta) const { return components(x, eta).total(); }
    /// Norm of right-hand sides: loads in the M^{-1} dual norm plus liftings
    /// in the M + A norm.
    double rhs(const std::vector<double>& t, const std::vector<VecX>& loads, const std::vector<VecX>& lifts,
               double eta) const;
    double p() const { return p_; }

private:
    double time_norm(const std::vector<double>& t, const std::vector<double>& c, double eta) const;
    const Problem* pb_;
    double p_;
    Eigen::SimplicialLDLT<SpMat> mm_;
};

Trajectory difference(const Trajectory& a, const Trajectory& b);
Trajectory scaled(const Trajectory& a, double c);

struct PicardSettings {
    double dt = 0.01;
    int steps = 100;
    ViscosityModel model = ViscosityModel::newtonian(2.0);
    bool nonlinear_slip = false;
    double gamma = 0.1;
    double eta = 0.5;
    double p = 2.0;
    double tol = 1e-10;
    int max_iter = 40;
    bool gate = true;
    bool volterra = false;
    double volterra_tol = 1e-12;
    int volterra_max_iter = 300;
    FlowOptions flow;
};

struct ContractionLog {
    std::vector<double> norms;      // |x_k|_S, k = 1..
    std::vector<double> diffs;      // |x_k - x_{k-1}|_S
    std::vector<double> ratios;     // diffs[k] / diffs[k-1]
    std::vector<double> rhs_norms;  // |RHS(x_{k-1})| used to produce x_k
    double gamma = 0.0;             // effective radius min(gamma, gamma0)
    double gamma0 = 0.0;
    double eta = 0.0;
    double c_peta = 0.0;
    double first_rhs_norm = 0.0;    // |RHS(x_1)|
    double lipschitz = 0.0;         // first ratio
    double cn_surrogate = 0.0;      // |RHS(x_1)| / |x_1|^2
    double clip_surrogate = 0.0;    // lipschitz / |x_1|
    bool gate_ok = true;
    bool converged = false;
    int iterations = 0;
    std::vector<int> volterra_iterations;
};

class NonContractionError : public SolverError {
public:
    NonContractionError(const std::string& what, ContractionLog log) : SolverError(what), log_(std::move(log)) {}
    const ContractionLog& log() const { return log_; }

private:
    ContractionLog log_;
};

class ContactError : public SolverError {
public:
    ContactError(int level, double t) : SolverError("body reached the contact threshold"), level_(level), t_(t) {}
    int level() const { return level_; }
    double time() const { return t_; }

private:
    int level_;
    double t_;
};

/// gamma0 = min{1, beta / (2 C (1 + diam))} with C = (1/(p' eta))^{1/p'}.
double gamma0(const DomainConfig& d, double eta, double p);

/// Level of the first time the rigid history brings the body closer than
/// beta/2 to the outer wall (-1 if never). Distances are returned in `dist`.
int first_contact_level(const DomainConfig& d, const BodyHistory& h, const FlowOptions& opt,
                        std::vector<double>* dist = nullptr);

struct FixedPointResult {
    Trajectory traj;
    Trajectory reference;  // generalized runs only
    ContractionLog log;
    std::optional<FlowMap> map;
};

/// Picard iteration x_{k+1} = N(x_k), where N rebuilds the change of
/// variables from the rigid history of x_k, evaluates the explicit terms and
/// solves the linear problem. Newtonian models use the global formulation;
/// other models solve for the perturbation of the Newtonian reference with the
/// frozen tangent. Throws NonContractionError, ContactError or SolverError;
/// `last` (optional) receives the most recent iterate.
FixedPointResult fixed_point_solve(const Problem& pb, const PicardSettings& st, const VecX& z0,
                                   Trajectory* last = nullptr);

enum class RunStatus { Global, BlowupNorm, Contact };
const char* status_name(RunStatus s);

struct SimulationResult {
    RunStatus status = RunStatus::Global;
    std::string message;
    Trajectory traj;
    ContractionLog log;
    std::optional<FlowMap> map;
    std::vector<double> distance;
    std::vector<double> energy;
    std::vector<Vec3> h;
    std::vector<Mat3> Q;
    double min_distance = 0.0;
    double t_contact = -1.0;
    std::optional<DecayFit> decay;
    double slip_residual = -1.0;
};

/// Full pipeline with the status monitor. Velocity sup-norms above
/// `blowup` (or a non-contracting iteration) end the run with BLOWUP_NORM.
SimulationResult simulate(const Problem& pb, const PicardSettings& st, const VecX& z0, double blowup = 1e3);

}  // namespace slipfsi
