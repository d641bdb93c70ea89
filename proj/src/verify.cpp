#include "slipfsi/verify.hpp"

#include "slipfsi/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace slipfsi {

using json = nlohmann::ordered_json;

void VerifyReport::add(const std::string& suite, const std::string& name, double value, const std::string& rel,
                       double threshold) {
    bool ok = false;
    if (std::isfinite(value)) {
        if (rel == "<=") ok = value <= threshold;
        else if (rel == "<") ok = value < threshold;
        else if (rel == ">=") ok = value >= threshold;
        else if (rel == ">") ok = value > threshold;
        else throw std::invalid_argument("unknown relation " + rel);
    }
    entries.push_back({suite, name, value, threshold, rel, ok});
}

bool VerifyReport::all_pass() const {
    for (const auto& e : entries)
        if (!e.pass) return false;
    return true;
}

json VerifyReport::to_json() const {
    json j;
    j["schema"] = "slipfsi-verify v1";
    j["pass"] = all_pass();
    json list = json::array();
    for (const auto& e : entries)
        list.push_back({{"suite", e.suite},
                        {"name", e.name},
                        {"value", std::isfinite(e.value) ? json(e.value) : json(nullptr)},
                        {"relation", e.relation},
                        {"threshold", e.threshold},
                        {"pass", e.pass}});
    j["checks"] = list;
    return j;
}

void VerifyReport::print(std::ostream& os) const {
    for (const auto& e : entries)
        os << (e.pass ? "PASS " : "FAIL ") << e.suite << '.' << e.name << ": " << std::setprecision(4)
           << std::scientific << e.value << ' ' << e.relation << ' ' << e.threshold << std::defaultfloat << "\n";
}

const std::vector<std::string>& verify_suites() {
    static const std::vector<std::string> s = {"transform", "operator", "spectral", "nonnewtonian"};
    return s;
}

double fd_div_lambda(const SpatialMotion& m, const CutoffPsi& psi, const Vec3& x, double h) {
    double div = 0.0;
    for (int k = 0; k < 3; ++k) {
        const Vec3 e = Vec3::Unit(k) * h;
        div += (eval_lambda(m, x + e, psi, 0).value[k] - eval_lambda(m, x - e, psi, 0).value[k]) / (2.0 * h);
    }
    return div;
}

namespace {

Mat3 cofactor(const Mat3& J) { return J.determinant() * J.inverse().transpose(); }

}  // namespace

Vec3 fd_piola_divergence(const FlowMap& map, const Vec3& y, int n, double h) {
    Vec3 div = Vec3::Zero();
    for (int j = 0; j < 3; ++j) {
        const Vec3 e = Vec3::Unit(j) * h;
        const Mat3 cp = cofactor(map.trace(y + e, n, false).J);
        const Mat3 cm = cofactor(map.trace(y - e, n, false).J);
        div += (cp.col(j) - cm.col(j)) / (2.0 * h);
    }
    return div;
}

Vec3 piola_divergence(const PointJet& jet) {
    const Mat3 Jinv = jet.J.inverse();
    const Mat3 JinvT = Jinv.transpose();
    const double det = jet.J.determinant();
    Vec3 div = Vec3::Zero();
    for (int j = 0; j < 3; ++j) {
        const Mat3& dJ = jet.dJ[j];
        const Mat3 dcof = det * ((Jinv * dJ).trace() * JinvT - JinvT * dJ.transpose() * JinvT);
        div += dcof.col(j);
    }
    return div;
}

namespace {

void transform_suite(const Problem& pb, VerifyReport& rep) {
    const DomainConfig& d = *pb.domain;
    const FluidSpace& s = *pb.space;
    const std::string S = "transform";

    {
        FlowMap fm(d, d.mesh.x, Vec3::Zero(), Vec3::Zero());
        for (int n = 0; n < 10; ++n) fm.advance(Vec3::Zero(), Vec3::Zero(), 0.05);
        double dx = 0.0, dj = 0.0;
        for (int n = 0; n < fm.levels(); ++n)
            for (int v = 0; v < fm.num_points(); ++v) {
                dx = std::max(dx, (fm.X(n, v) - d.mesh.x[v]).norm());
                dj = std::max(dj, (fm.J(n, v) - Mat3::Identity()).norm());
            }
        rep.add(S, "stationary_identity_X", dx, "<=", 1e-14);
        rep.add(S, "stationary_identity_J", dj, "<=", 1e-14);
        rep.add(S, "stationary_det", fm.max_det_error(), "<=", 1e-14);
    }

    FlowMap fm(d, d.mesh.x, Vec3(0.05, 0.0, 0.0), Vec3(0.0, 0.0, 0.07));
    const double dt = 0.02;
    for (int n = 1; n <= 50; ++n) {
        const double t = n * dt;
        fm.advance(Vec3(0.06 * std::cos(t), 0.05 * std::sin(2 * t), 0.03),
                   Vec3(0.02, 0.05 * std::cos(t), 0.07 * std::sin(t) + 0.01), dt);
    }
    rep.add(S, "det_JX", fm.max_det_error(), "<=", 1e-8);
    double jq = 0.0, rigid = 0.0;
    for (int n = 0; n < fm.levels(); ++n)
        for (int v : s.solid_vertices()) {
            jq = std::max(jq, (fm.J(n, v) - fm.Q(n)).norm());
            rigid = std::max(rigid, (fm.X(n, v) - fm.h(n) - fm.Q(n) * s.lever(v)).norm());
        }
    rep.add(S, "JX_equals_Q_on_solid", jq, "<=", 1e-8);
    rep.add(S, "rigid_motion_on_solid", rigid, "<=", 1e-8);

    const TetRule& rule = tet_rule(2);
    double div = 0.0;
    for (int n : {0, fm.levels() / 2, fm.levels() - 1}) {
        const SpatialMotion m = fm.motion(n);
        for (int t = 0; t < s.nt(); ++t) {
            const auto& tet = d.mesh.tets[t];
            for (const auto& xi : rule.xi) {
                const auto lam = barycentric_from_ref(xi);
                Vec3 x = Vec3::Zero();
                for (int k = 0; k < 4; ++k) x += lam[k] * d.mesh.x[tet[k]];
                div = std::max(div, std::abs(eval_lambda(m, x, fm.psi(), 1).grad.trace()));
            }
        }
    }
    rep.add(S, "div_lambda_quadrature", div, "<=", 1e-10);

    const int n = fm.levels() - 1;
    double piola = 0.0;
    const int stride = std::max(1, s.nv() / 40);
    for (int v = 0; v < s.nv(); v += stride)
        piola = std::max(piola, piola_divergence(fm.trace(d.mesh.x[v], n, true)).norm());
    rep.add(S, "piola_row_divergence", piola, "<=", 1e-6);
}

void operator_suite(const Problem& pb, VerifyReport& rep) {
    const CoupledOperator& op = *pb.op;
    const std::string S = "operator";
    const Mat6& M = op.added_mass();
    rep.add(S, "added_mass_symmetry", (M - M.transpose()).norm() / std::max(M.norm(), 1e-300), "<=", 1e-10);
    Eigen::SelfAdjointEigenSolver<Mat6> es(0.5 * (M + M.transpose()));
    rep.add(S, "added_mass_min_eigenvalue", es.eigenvalues().minCoeff(), ">=", -1e-10);
    const bool centered = pb.domain->solid.center.norm() < 1e-12 && pb.domain->outer.center.norm() < 1e-12;
    if (centered)
        rep.add(S, "added_mass_rotational_columns", M.rightCols<3>().cwiseAbs().maxCoeff(), "<=", 1e-8);
    rep.add(S, "K_abs_determinant", std::abs(op.K().determinant()), ">", 0.0);
    rep.add(S, "K_condition", op.K_condition(), "<", 1e12);
}

void spectral_suite(const Problem& pb, const SpectrumOptions& opt, VerifyReport& rep) {
    const std::string S = "spectral";
    const SpectralReport r = spectrum(*pb.op, opt);
    rep.add(S, "converged", r.converged ? 1.0 : 0.0, ">=", 1.0);
    rep.add(S, "abscissa", r.abscissa, "<", 0.0);
    double res = 0.0;
    for (double x : r.residuals) res = std::max(res, x);
    rep.add(S, "max_relative_residual", res, "<=", 1e-6);
}

void nonnewtonian_suite(const Problem& pb, VerifyReport& rep) {
    const std::string S = "nonnewtonian";
    const FluidSpace& s = *pb.space;
    const Vec6 xi = (Vec6() << 0.3, -0.2, 0.1, 0.2, 0.1, -0.3).finished();
    const VecX u = s.to_raw(pb.solver->steady_lifting(xi).z);

    const SpMat K = assemble_tangent(s, ViscosityModel::carreau(pb.mu0, 2.0), u);
    const SpMat& A = pb.blocks->A_raw;
    rep.add(S, "d2_tangent_equals_newtonian", SpMat(K - A).norm() / A.norm(), "<=", 1e-12);
    const VecX act = viscous_action(s, ViscosityModel::carreau(pb.mu0, 2.0), MetricField::identity_field(s), u);
    const VecX ref = A * u;
    rep.add(S, "d2_action_equals_newtonian", (act - ref).norm() / ref.norm(), "<=", 1e-12);

    for (double dd : {1.5, 3.0}) {
        const std::string tag = dd == 1.5 ? "1.5" : "3";
        const auto lh = sample_legendre_hadamard(ViscosityModel::carreau(pb.mu0, dd), 1000);
        rep.add(S, "legendre_hadamard_carreau_d" + tag, lh.min_value, ">", 0.0);
    }
    const auto lhp = sample_legendre_hadamard(ViscosityModel::power_law(pb.mu0, 1.5), 1000);
    rep.add(S, "legendre_hadamard_power_law_d1.5", lhp.min_value, ">", 0.0);

    double singular = 0.0;
    try {
        ViscosityModel::power_law(pb.mu0, 1.5).eval(0.0);
    } catch (const SingularViscosityError&) {
        singular = 1.0;
    }
    rep.add(S, "power_law_zero_shear_flagged", singular, ">=", 1.0);
}

}  // namespace

VerifyReport run_verify(const std::string& suite, const Problem& pb, const SpectrumOptions& spec) {
    VerifyReport rep;
    const bool all = suite == "all";
    bool known = all;
    for (const auto& s : verify_suites()) known = known || s == suite;
    if (!known) throw std::invalid_argument("unknown verify suite '" + suite + "'");
    if (all || suite == "transform") transform_suite(pb, rep);
    if (all || suite == "operator") operator_suite(pb, rep);
    if (all || suite == "spectral") spectral_suite(pb, spec, rep);
    if (all || suite == "nonnewtonian") nonnewtonian_suite(pb, rep);
    return rep;
}

}  // namespace slipfsi
