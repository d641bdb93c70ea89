#pragma once

#include "slipfsi/geometry.hpp"
#include "slipfsi/linalg.hpp"

#include <array>
#include <functional>
#include <vector>

namespace slipfsi {

class FluidSpace;

using Tensor3 = std::array<Mat3, 3>;

/// Cut-off and its derivatives at a point. third[i](j,k) = d3 psi / dx_i dx_j dx_k.
struct PsiJet {
    double value = 0.0;
    Vec3 grad = Vec3::Zero();
    Mat3 hess = Mat3::Zero();
    Tensor3 third{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
};

/// Radial cut-off in the distance d to the outer sphere: 0 for d <= beta/8,
/// 1 for d >= beta/4, a C3 septic smoothstep in between.
class CutoffPsi {
public:
    CutoffPsi(const Sphere& outer, double beta);

    double inner_margin() const { return 0.25 * beta_; }
    double outer_margin() const { return 0.125 * beta_; }
    double beta() const { return beta_; }
    const Sphere& outer() const { return outer_; }

    double value(const Vec3& x) const;
    /// Derivatives up to `order` (0..3).
    PsiJet jet(const Vec3& x, int order = 3) const;

    /// Septic smoothstep s(t) on [0, 1] and its first three derivatives.
    static std::array<double, 4> smoothstep(double t);

private:
    Sphere outer_;
    double beta_;
};

/// Rigid motion in the spatial frame: center h, velocity l, angular velocity omega.
struct SpatialMotion {
    Vec3 h = Vec3::Zero();
    Vec3 l = Vec3::Zero();
    Vec3 omega = Vec3::Zero();
};

/// w = 1/2 l x r - 1/2 |r|^2 omega with r = x - h, so that curl w = l + omega x r.
Vec3 eval_w(const SpatialMotion& m, const Vec3& x);

/// Lambda and its derivatives. grad(i,j) = d Lambda_i / dx_j,
/// hess[i](j,k) = d2 Lambda_i / dx_j dx_k.
struct LambdaJet {
    Vec3 value = Vec3::Zero();
    Mat3 grad = Mat3::Zero();
    Tensor3 hess{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
};

/// Lambda = curl(psi w) = psi (l + omega x r) + grad psi x w. `order` 0, 1 or 2.
LambdaJet eval_lambda(const SpatialMotion& m, const Vec3& x, const CutoffPsi& psi, int order = 1);

struct FlowOptions {
    double det_tol = 1e-11;  // allowed change of det J_X per macro step
    double dt_min = 1e-9;
    bool second_order = false;  // also integrate dJ_X/dy
    double reortho_tol = 1e-10;
};

/// Body-frame velocities at the macro time levels (linear in between).
struct BodyHistory {
    std::vector<double> t;
    std::vector<Vec3> l_body;
    std::vector<Vec3> omega_body;
};

/// State of one tracked point: X, J_X and, optionally, dJ[k] = dJ_X/dy_k.
struct PointJet {
    Vec3 X = Vec3::Zero();
    Mat3 J = Mat3::Identity();
    Tensor3 dJ{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
};

struct FlowJacobians {
    Mat3 JX;
    Mat3 JY;
    double det = 1.0;
    Tensor3 d2Y;  // d2Y[i](j,k) = d2 Y_i / dx_j dx_k
};

/// Flow map X(y, t) of dX/dt = Lambda(X, t) together with the rigid motion
/// h' = Q l~, Q' = (Q omega~) x Q. Tracks a fixed set of reference points
/// (normally the mesh vertices) on a macro time grid; any other point is
/// obtained by replaying the recorded substep sequence.
class FlowMap {
public:
    FlowMap(const DomainConfig& domain, std::vector<Vec3> points, const Vec3& l0_body, const Vec3& omega0_body,
            const FlowOptions& opt = {});

    static FlowMap build(const DomainConfig& domain, std::vector<Vec3> points, const BodyHistory& history,
                         const FlowOptions& opt = {});

    /// Advances one macro step of length dt to body velocities (l1, omega1).
    void advance(const Vec3& l1_body, const Vec3& omega1_body, double dt);

    int levels() const { return static_cast<int>(t_.size()); }
    int num_points() const { return static_cast<int>(points_.size()); }
    double time(int n) const { return t_[n]; }
    const Vec3& h(int n) const { return h_[n]; }
    const Mat3& Q(int n) const { return Q_[n]; }
    const Vec3& l_body(int n) const { return lb_[n]; }
    const Vec3& omega_body(int n) const { return wb_[n]; }
    SpatialMotion motion(int n) const;
    int substeps(int n) const { return substeps_[n]; }
    const Vec3& reference(int p) const { return points_[p]; }
    const Vec3& center() const { return center_; }
    const CutoffPsi& psi() const { return psi_; }
    const FlowOptions& options() const { return opt_; }

    const Vec3& X(int n, int p) const { return X_[n][p]; }
    const Mat3& J(int n, int p) const { return J_[n][p]; }
    /// Only with second_order.
    const Tensor3& dJ(int n, int p) const;
    /// dX/dt = Lambda(X, t_n).
    Vec3 velocity(int n, int p) const;

    /// Replays the trajectory of an arbitrary reference point to level n.
    PointJet trace(const Vec3& y, int n, bool second_order) const;
    /// Y(x, t_n) by damped Newton; throws SolverError on failure.
    Vec3 invert(const Vec3& x, int n, double tol = 1e-10, int max_iter = 60) const;
    FlowJacobians jacobians(const Vec3& y, int n) const;

    /// max over tracked points and levels of |det J_X - 1|.
    double max_det_error() const;

private:
    using Stages = std::array<SpatialMotion, 4>;
    void step_points(const std::vector<Stages>& subs, double tau, PointJet& p, bool second) const;
    std::vector<Stages> replay_stages(int n) const;

    CutoffPsi psi_;
    FlowOptions opt_;
    Vec3 center_;
    std::vector<Vec3> points_;
    std::vector<double> t_;
    std::vector<Vec3> h_, lb_, wb_;
    std::vector<Mat3> Q_;
    std::vector<int> substeps_;
    int next_ns_ = 1;
    std::vector<std::vector<Vec3>> X_;
    std::vector<std::vector<Mat3>> J_;
    std::vector<std::vector<Tensor3>> dJ_;
};

/// Vertex fields of the mesh in the moving frame.
struct SpatialSnapshot {
    std::vector<Vec3> x;  // deformed vertex positions X(y_v, t)
    std::vector<Vec3> u;
    VecX p;
};

/// u~(y) = Q^T u(X(y, t)), pi~(y) = pi(X(y, t)) at the vertices of the mesh
/// whose vertices are the map's tracked points. Bubble coefficients are zero.
std::pair<VecX, VecX> pullback_fields(const FluidSpace& s, const FlowMap& map, int n,
                                      const std::function<Vec3(const Vec3&)>& u,
                                      const std::function<double(const Vec3&)>& pi);
/// u(X(y, t)) = Q u~(y) and pi(X(y, t)) = pi~(y) on the deformed vertices.
SpatialSnapshot pushforward_fields(const FluidSpace& s, const FlowMap& map, int n, const VecX& u_raw,
                                   const VecX& pi);
/// Pushed-forward velocity Q u~(Y(x, t)) at an arbitrary spatial point.
Vec3 pushforward_eval(const FluidSpace& s, const FlowMap& map, int n, const VecX& u_raw, const Vec3& x);

/// Tet containing reference point y and its barycentric coordinates
/// (tet = -1 if outside the mesh).
struct TetLocation {
    int tet = -1;
    std::array<double, 4> lambda{};
};
TetLocation locate_point(const FluidSpace& s, const Vec3& y, double tol = 1e-12);

}  // namespace slipfsi
