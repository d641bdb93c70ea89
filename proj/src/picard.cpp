#include "slipfsi/picard.hpp"

#include "slipfsi/weakform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace slipfsi {

namespace {

constexpr int kConvRule = 4;
constexpr int kViscRule = 5;

Mat3 sym(const Mat3& g) { return 0.5 * (g + g.transpose()); }

VecX pad_free(const VecX& H, int nz) {
    VecX z = VecX::Zero(nz);
    if (H.size() > 0) z.head(H.size()) = H;
    return z;
}

}  // namespace

Problem Problem::create(const DomainConfig& d, double mu0, double density) {
    if (!(mu0 > 0.0)) throw std::invalid_argument("mu0 must be positive");
    Problem pb;
    pb.domain = std::make_shared<DomainConfig>(d);
    pb.space = std::make_shared<FluidSpace>(d);
    pb.blocks = std::make_shared<StokesBlocks>(assemble_stokes(pb.space, 0.5 * mu0));
    pb.solver = std::make_shared<StokesSolver>(pb.blocks);
    pb.body = make_body(d, density);
    pb.op = std::make_shared<CoupledOperator>(pb.solver, pb.body);
    pb.mu0 = mu0;
    return pb;
}

const char* group_name(F0Group g) {
    switch (g) {
        case F0Group::Rotation: return "rotation";
        case F0Group::Transport: return "transport";
        case F0Group::Convection: return "convection";
        case F0Group::Viscous: return "viscous";
        case F0Group::Pressure: return "pressure";
    }
    return "?";
}

VecX NonlinearTerms::F0() const {
    VecX f = groups[0];
    for (int k = 1; k < kF0Groups; ++k) f += groups[k];
    return f;
}

VecX NonlinearTerms::load(const FluidSpace& s) const {
    VecX f = F0();
    f.segment<3>(s.nfree()) += F1;
    f.segment<3>(s.nfree() + 3) += F2;
    return f;
}

NonlinearTerms nonlinear_terms(const Problem& pb, const MetricField& metric, const VecX& z, const VecX& p,
                               const TermOptions& opt) {
    const FluidSpace& s = *pb.space;
    if (metric.G.size() != static_cast<size_t>(s.nv()) || metric.b.size() != metric.G.size())
        throw std::invalid_argument("nonlinear_terms: metric data missing");
    const int nf = s.nfree();
    const VecX u = s.to_raw(z);
    const Vec3 w = z.segment<3>(nf + 3);
    const Mat3 I = Mat3::Identity();
    std::array<VecX, kF0Groups> raw;
    for (auto& r : raw) r = VecX::Zero(s.raw_size());

    for (int t = 0; t < s.nt(); ++t) {
        const Local35 U = gather(s, u, t);
        const bool id = metric.tet_identity[t];
        const Vec3 gp = p.size() > 0 ? p1_gradient(s, p, t) : Vec3::Zero();
        Local35 rot = Local35::Zero(), tr = Local35::Zero(), conv = Local35::Zero(), pres = Local35::Zero();
        for (const QPoint& q : tet_points(s, t, kConvRule)) {
            const Vec3 uq = value_at(U, q);
            const Mat3 gu = grad_at(U, q);
            const Vec3 bq = interpolate_vertex(s, metric.b, t, q.lambda);
            add_test(rot, q, -w.cross(uq), Mat3::Zero());
            add_test(tr, q, gu * bq, Mat3::Zero());
            if (id) {
                add_test(conv, q, -gu * uq, Mat3::Zero());
            } else {
                const Mat3 G = interpolate_vertex(s, metric.G, t, q.lambda);
                add_test(conv, q, -gu * (G * uq), Mat3::Zero());
                add_test(pres, q, (I - G.transpose()) * gp, Mat3::Zero());
            }
        }
        scatter_add(s, t, rot, raw[static_cast<int>(F0Group::Rotation)]);
        scatter_add(s, t, tr, raw[static_cast<int>(F0Group::Transport)]);
        scatter_add(s, t, conv, raw[static_cast<int>(F0Group::Convection)]);
        if (id) continue;
        scatter_add(s, t, pres, raw[static_cast<int>(F0Group::Pressure)]);
        if (!opt.viscous) continue;
        Local35 visc = Local35::Zero();
        for (const QPoint& q : tet_points(s, t, kViscRule)) {
            const Mat3 gu = grad_at(U, q);
            const Mat3 G = interpolate_vertex(s, metric.G, t, q.lambda);
            const Mat3 P = pb.mu0 * (sym(gu) - transformed_sym_gradient(gu, G) * G.transpose());
            add_test(visc, q, Vec3::Zero(), P);
        }
        scatter_add(s, t, visc, raw[static_cast<int>(F0Group::Viscous)]);
    }

    NonlinearTerms out;
    for (int k = 0; k < kF0Groups; ++k) out.groups[k] = s.T().transpose() * raw[k];

    out.H_raw = VecX::Zero(s.raw_size());
    for (int v = 0; v < s.nv(); ++v)
        out.H_raw.segment<3>(s.raw_vertex(v, 0)) = (I - metric.G[v]) * u.segment<3>(s.raw_vertex(v, 0));
    for (int t = 0; t < s.nt(); ++t) {
        if (metric.tet_identity[t]) continue;
        const auto& tet = s.mesh().tets[t];
        Mat3 Gc = Mat3::Zero();
        for (int k = 0; k < 4; ++k) Gc += 0.25 * metric.G[tet[k]];
        out.H_raw.segment<3>(s.raw_bubble(t, 0)) = (I - Gc) * u.segment<3>(s.raw_bubble(t, 0));
    }
    out.H_free = s.free_from_raw(out.H_raw, std::numeric_limits<double>::infinity());

    if (opt.rigid) {
        const Vec3 l = z.segment<3>(nf);
        out.F1 = rigid_f1(pb.body.mass, l, w);
        out.F2 = rigid_f2(pb.body.inertia, w);
    }
    return out;
}

VecX wall_law_load(const FluidSpace& s, const VecX& z) {
    const int nf = s.nfree();
    const Vec6 xi = z.segment<6>(nf);
    const VecX u = s.to_raw(z);
    std::vector<Vec3> g = nonlinear_slip_rhs(s, u);
    for (int v : s.solid_vertices()) {
        const Vec3 us = s.rigid_map(v) * xi;
        const Vec3& n = s.normal(v);
        const Vec3 ust = us - us.dot(n) * n;
        g[v] -= s.domain().alpha[v] * (1.0 - us.norm()) * ust;
    }
    return slip_load(s, g);
}

double wall_law_residual(const Problem& pb, const Trajectory& x, const FlowMap* map) {
    const FluidSpace& s = *pb.space;
    const StokesBlocks& b = *pb.blocks;
    const int nf = s.nfree();
    const SpMat Av = b.A - b.Aslip;
    const double dt = x.dt();
    double worst = 0.0;
    for (int n = 1; n < x.levels(); ++n) {
        const MetricField metric = map ? MetricField::from_map(s, *map, n) : MetricField::identity_field(s);
        const NonlinearTerms nt = nonlinear_terms(pb, metric, x.z[n], x.p[n]);
        const VecX R = b.Mu * (x.z[n] - x.z[n - 1]) / dt + Av * x.z[n] + b.B.transpose() * x.p[n] - nt.F0();
        const VecX u = s.to_raw(x.z[n]);
        const Vec6 xi = x.z[n].segment<6>(nf);
        double sum = 0.0;
        for (int v : s.solid_vertices()) {
            const double wv = s.boundary_weight(v);
            const int f = s.free_vertex(v);
            const Vec3& nrm = s.normal(v);
            const Vec3 traction = (R[f] * s.tangent1(v) + R[f + 1] * s.tangent2(v)) / wv;
            const Vec3 uv = u.segment<3>(s.raw_vertex(v, 0));
            const Vec3 us = s.rigid_map(v) * xi;
            const double a = s.domain().alpha[v];
            const Vec3 r = traction + a * uv.norm() * (uv - uv.dot(nrm) * nrm) - a * us.norm() * (us - us.dot(nrm) * nrm);
            sum += wv * r.squaredNorm();
        }
        worst = std::max(worst, std::sqrt(sum));
    }
    return worst;
}

SNorm::SNorm(const Problem& pb, double p) : pb_(&pb), p_(p) {
    if (!(p > 1.0)) throw std::invalid_argument("SNorm: exponent must exceed 1");
    mm_.compute(pb.op->MM());
    if (mm_.info() != Eigen::Success) throw SolverError("SNorm: mass factorization failed");
}

double SNorm::time_norm(const std::vector<double>& t, const std::vector<double>& c, double eta) const {
    const size_t n = t.size();
    if (n == 0) return 0.0;
    if (n == 1) return c[0];
    double s = 0.0;
    for (size_t k = 0; k < n; ++k) {
        const double w = k == 0 ? 0.5 * (t[1] - t[0])
                                : (k == n - 1 ? 0.5 * (t[k] - t[k - 1]) : 0.5 * (t[k + 1] - t[k - 1]));
        s += w * std::pow(std::exp(eta * t[k]) * c[k], p_);
    }
    return std::pow(s, 1.0 / p_);
}

SNorm::Components SNorm::components(const Trajectory& x, double eta) const {
    const SpMat& MM = pb_->op->MM();
    const SpMat& AA = pb_->blocks->A;
    const SpMat& L = pb_->blocks->L_p1;
    const int nf = pb_->space->nfree();
    const int N = x.levels();
    std::vector<double> cs(N), ce(N), cp(N), cl(N), cw(N);
    for (int n = 0; n < N; ++n) {
        const VecX& z = x.z[n];
        const int a = n == 0 ? std::min(1, N - 1) : n;
        const VecX zd = a > 0 ? VecX((x.z[a] - x.z[a - 1]) / (x.t[a] - x.t[a - 1])) : VecX::Zero(z.size());
        const VecX Mz = MM * z, Az = AA * z;
        const double m2 = z.dot(Mz);
        cs[n] = std::sqrt(std::max(0.0, m2 + z.dot(Az) + Az.dot(mm_.solve(Az))));
        ce[n] = std::sqrt(std::max(0.0, m2 + zd.dot(MM * zd)));
        cp[n] = x.p[n].size() > 0 ? std::sqrt(std::max(0.0, x.p[n].dot(L * x.p[n]))) : 0.0;
        cl[n] = std::sqrt(z.segment<3>(nf).squaredNorm() + zd.segment<3>(nf).squaredNorm());
        cw[n] = std::sqrt(z.segment<3>(nf + 3).squaredNorm() + zd.segment<3>(nf + 3).squaredNorm());
    }
    Components c;
    c.strong = time_norm(x.t, cs, eta);
    c.evolution = time_norm(x.t, ce, eta);
    c.pressure = time_norm(x.t, cp, eta);
    c.l = time_norm(x.t, cl, eta);
    c.omega = time_norm(x.t, cw, eta);
    return c;
}

double SNorm::rhs(const std::vector<double>& t, const std::vector<VecX>& loads, const std::vector<VecX>& lifts,
                  double eta) const {
    const SpMat& MM = pb_->op->MM();
    const SpMat& AA = pb_->blocks->A;
    const int nz = pb_->space->nz();
    std::vector<double> cf(t.size(), 0.0), ch(t.size(), 0.0);
    for (size_t n = 1; n < t.size(); ++n) {
        if (n - 1 < loads.size()) cf[n] = std::sqrt(std::max(0.0, loads[n - 1].dot(mm_.solve(loads[n - 1]))));
        if (n - 1 < lifts.size() && lifts[n - 1].size() > 0) {
            const VecX H = pad_free(lifts[n - 1], nz);
            ch[n] = std::sqrt(std::max(0.0, H.dot(MM * H) + H.dot(AA * H)));
        }
    }
    return time_norm(t, cf, eta) + time_norm(t, ch, eta);
}

Trajectory difference(const Trajectory& a, const Trajectory& b) {
    if (a.levels() != b.levels()) throw std::invalid_argument("difference: level count mismatch");
    Trajectory d = a;
    for (int n = 0; n < a.levels(); ++n) {
        d.z[n] -= b.z[n];
        d.p[n] -= b.p[n];
    }
    return d;
}

Trajectory scaled(const Trajectory& a, double c) {
    Trajectory d = a;
    for (int n = 0; n < a.levels(); ++n) {
        d.z[n] *= c;
        d.p[n] *= c;
    }
    return d;
}

double gamma0(const DomainConfig& d, double eta, double p) {
    if (!(eta > 0.0)) throw std::invalid_argument("gamma0: eta must be positive");
    const double pc = p / (p - 1.0);
    const double C = std::pow(1.0 / (pc * eta), 1.0 / pc);
    const double diam = 2.0 * d.solid.radius;
    return std::min(1.0, d.beta / (2.0 * C * (1.0 + diam)));
}

int first_contact_level(const DomainConfig& d, const BodyHistory& h, const FlowOptions& opt,
                        std::vector<double>* dist) {
    FlowMap map(d, {}, h.l_body[0], h.omega_body[0], opt);
    if (dist) dist->clear();
    int hit = -1;
    for (size_t n = 0; n < h.t.size(); ++n) {
        if (n > 0) map.advance(h.l_body[n], h.omega_body[n], h.t[n] - h.t[n - 1]);
        RigidState rs;
        rs.Q = map.Q(static_cast<int>(n));
        rs.h = map.h(static_cast<int>(n)) - rs.Q * d.solid.center;
        const double dd = body_distance(rs, d).distance;
        if (dist) dist->push_back(dd);
        if (hit < 0 && dd < 0.5 * d.beta) {
            hit = static_cast<int>(n);
            if (!dist) break;
        }
        if (hit >= 0) break;
    }
    return hit;
}

namespace {

/// One application of the fixed-point map.
class PicardMap {
public:
    PicardMap(const Problem& pb, const PicardSettings& st, const VecX& z0) : pb_(pb), st_(st), z0_(z0) {
        generalized_ = !st.model.is_newtonian();
        if (generalized_) {
            reference_ = newtonian_reference(*pb.op, z0, st.dt, st.steps);
            const FluidSpace& s = *pb.space;
            std::vector<SpMat> visc;
            for (int n = 1; n <= st.steps; ++n) {
                const SpMat K = assemble_tangent(s, st.model, s.to_raw(reference_.z[n]));
                visc.push_back(SpMat(s.T().transpose() * K * s.T()));
                tangents_.push_back(K);
            }
            evolution_ = std::make_unique<LinearEvolution>(*pb.op, st.dt, std::move(visc));
        } else {
            stepper_ = std::make_unique<LinearStepper>(*pb.op, st.dt);
        }
    }

    bool generalized() const { return generalized_; }
    const Trajectory& reference() const { return reference_; }

    Trajectory initial() const {
        if (generalized_) return reference_;
        Trajectory x;
        for (int n = 0; n <= st_.steps; ++n) {
            x.t.push_back(n * st_.dt);
            x.z.push_back(n == 0 ? z0_ : VecX::Zero(z0_.size()));
            x.p.push_back(VecX::Zero(pb_.blocks->B.rows()));
        }
        return x;
    }

    struct Output {
        Trajectory next;
        double rhs_norm = 0.0;
        std::optional<FlowMap> map;
        int volterra_iterations = 0;
    };

    Output apply(const Trajectory& x, const SNorm& norm, double eta) const {
        const FluidSpace& s = *pb_.space;
        const int nf = s.nfree();
        const BodyHistory hist = x.body(nf);
        const int hit = first_contact_level(*pb_.domain, hist, st_.flow);
        if (hit >= 0) throw ContactError(hit, x.t[hit]);

        Output out;
        out.map.emplace(FlowMap::build(*pb_.domain, pb_.domain->mesh.x, hist, st_.flow));
        const FlowMap& map = *out.map;
        std::vector<VecX> loads(st_.steps), lifts(st_.steps);
        TermOptions opt;
        opt.viscous = !generalized_;
        opt.rigid = !generalized_;
        for (int n = 1; n <= st_.steps; ++n) {
            const MetricField metric = MetricField::from_map(s, map, n);
            const NonlinearTerms nt = nonlinear_terms(pb_, metric, x.z[n], x.p[n], opt);
            VecX load = nt.load(s);
            if (generalized_) {
                const RemainderTerms r = remainder_terms(s, st_.model, metric, tangents_[n - 1], 0.5 * pb_.mu0,
                                                         reference_.z[n], x.z[n] - reference_.z[n], pb_.body);
                load += r.assemble(s);
            }
            if (st_.nonlinear_slip) load += wall_law_load(s, x.z[n]);
            loads[n - 1] = std::move(load);
            lifts[n - 1] = nt.H_free;
        }
        out.rhs_norm = norm.rhs(x.t, loads, lifts, eta);

        if (!generalized_) {
            Trajectory tr;
            tr.t.push_back(0.0);
            tr.z.push_back(z0_);
            tr.p.push_back(VecX::Zero(pb_.blocks->B.rows()));
            for (int n = 1; n <= st_.steps; ++n) {
                auto step = stepper_->step(tr.z.back(), loads[n - 1], lifts[n - 1]);
                tr.t.push_back(n * st_.dt);
                tr.z.push_back(std::move(step.z));
                tr.p.push_back(std::move(step.p));
            }
            tr.p[0] = tr.p.size() > 1 ? tr.p[1] : tr.p[0];
            out.next = std::move(tr);
            return out;
        }

        const VecX zero = VecX::Zero(z0_.size());
        Trajectory hat;
        if (st_.volterra) {
            LinearEvolution::VolterraLog lg;
            hat = evolution_->solve_volterra(zero, loads, lifts, st_.volterra_tol, st_.volterra_max_iter, &lg);
            out.volterra_iterations = lg.iterations;
        } else {
            hat = evolution_->solve_monolithic(zero, loads, lifts);
        }
        for (int n = 0; n <= st_.steps; ++n) {
            hat.z[n] += reference_.z[n];
            hat.p[n] += reference_.p[n];
        }
        out.next = std::move(hat);
        return out;
    }

private:
    const Problem& pb_;
    const PicardSettings& st_;
    VecX z0_;
    bool generalized_ = false;
    Trajectory reference_;
    std::vector<SpMat> tangents_;
    std::unique_ptr<LinearStepper> stepper_;
    std::unique_ptr<LinearEvolution> evolution_;
};

}  // namespace

FixedPointResult fixed_point_solve(const Problem& pb, const PicardSettings& st, const VecX& z0, Trajectory* last) {
    if (st.steps < 1) throw std::invalid_argument("fixed_point_solve: steps must be positive");
    if (z0.size() != pb.space->nz()) throw std::invalid_argument("fixed_point_solve: initial data size mismatch");
    const PicardMap N(pb, st, z0);
    const SNorm norm(pb, st.p);
    FixedPointResult res;
    ContractionLog& lg = res.log;
    lg.eta = st.eta;
    if (st.eta > 0.0) {
        lg.gamma0 = gamma0(*pb.domain, st.eta, st.p);
        const double pc = st.p / (st.p - 1.0);
        lg.c_peta = std::pow(1.0 / (pc * st.eta), 1.0 / pc);
        lg.gamma = std::min(st.gamma, lg.gamma0);
    } else {
        if (st.gate) throw std::invalid_argument("the smallness gate needs eta > 0");
        lg.gamma = st.gamma;
    }

    Trajectory x = N.initial();
    int nonshrinking = 0;
    for (int k = 1; k <= st.max_iter; ++k) {
        if (last) *last = x;
        auto out = N.apply(x, norm, st.eta);
        const double diff = norm(difference(out.next, x), st.eta);
        const double nrm = norm(out.next, st.eta);
        if (!std::isfinite(diff) || !std::isfinite(nrm)) throw NonContractionError("fixed-point iterate is not finite", lg);
        lg.rhs_norms.push_back(out.rhs_norm);
        if (st.volterra) lg.volterra_iterations.push_back(out.volterra_iterations);
        if (!lg.diffs.empty()) lg.ratios.push_back(lg.diffs.back() > 0.0 ? diff / lg.diffs.back() : 0.0);
        lg.diffs.push_back(diff);
        lg.norms.push_back(nrm);
        lg.iterations = k;
        x = std::move(out.next);
        res.map = std::move(out.map);
        if (k == 1) {
            lg.gate_ok = nrm <= 0.5 * lg.gamma;
            if (st.gate && !lg.gate_ok)
                throw NonContractionError("initial data exceed the smallness gate |x1|_S <= gamma/2", lg);
        }
        if (k == 2) {
            lg.first_rhs_norm = out.rhs_norm;
            lg.lipschitz = lg.ratios.empty() ? 0.0 : lg.ratios.back();
            const double n1 = lg.norms[0];
            lg.cn_surrogate = n1 > 0.0 ? out.rhs_norm / (n1 * n1) : 0.0;
            lg.clip_surrogate = n1 > 0.0 ? lg.lipschitz / n1 : 0.0;
        }
        const bool last_ratio_ok = lg.ratios.empty() || lg.ratios.back() < 1.0;
        if (diff <= st.tol * std::max(nrm, std::numeric_limits<double>::min()) && last_ratio_ok) {
            lg.converged = true;
            break;
        }
        if (diff == 0.0) {
            lg.converged = true;
            break;
        }
        nonshrinking = last_ratio_ok ? 0 : nonshrinking + 1;
        if (nonshrinking >= 3) throw NonContractionError("fixed-point map is not contracting", lg);
    }
    if (last) *last = x;
    if (!lg.converged) throw NonContractionError("fixed-point iteration did not converge within max_iter", lg);
    if (N.generalized()) res.reference = N.reference();
    res.traj = std::move(x);
    // Rebuild the map from the converged rigid history for the pushforward.
    res.map.emplace(FlowMap::build(*pb.domain, pb.domain->mesh.x, res.traj.body(pb.space->nfree()), st.flow));
    return res;
}

const char* status_name(RunStatus s) {
    switch (s) {
        case RunStatus::Global: return "GLOBAL";
        case RunStatus::BlowupNorm: return "BLOWUP_NORM";
        case RunStatus::Contact: return "CONTACT";
    }
    return "?";
}

namespace {

void fill_series(const Problem& pb, const PicardSettings& st, SimulationResult& r) {
    const int nf = pb.space->nfree();
    const BodyHistory hist = r.traj.body(nf);
    first_contact_level(*pb.domain, hist, st.flow, &r.distance);
    FlowMap rigid(*pb.domain, {}, hist.l_body[0], hist.omega_body[0], st.flow);
    r.h.clear();
    r.Q.clear();
    r.energy.clear();
    for (int n = 0; n < r.traj.levels(); ++n) {
        if (n > 0) rigid.advance(hist.l_body[n], hist.omega_body[n], hist.t[n] - hist.t[n - 1]);
        r.h.push_back(rigid.h(n));
        r.Q.push_back(rigid.Q(n));
        r.energy.push_back(pb.op->energy(r.traj.z[n]));
    }
    r.min_distance = r.distance.empty() ? 0.0 : *std::min_element(r.distance.begin(), r.distance.end());
    std::vector<double> amp;
    bool positive = true;
    for (double e : r.energy) {
        amp.push_back(std::sqrt(std::max(0.0, 2.0 * e)));
        positive = positive && amp.back() > 0.0;
    }
    if (positive && amp.size() >= 17) r.decay = fit_decay_rate(r.traj.t, amp, 0.6);
}

Trajectory truncate(const Trajectory& x, int last) {
    Trajectory y;
    y.t.assign(x.t.begin(), x.t.begin() + last + 1);
    y.z.assign(x.z.begin(), x.z.begin() + last + 1);
    y.p.assign(x.p.begin(), x.p.begin() + last + 1);
    return y;
}

}  // namespace

SimulationResult simulate(const Problem& pb, const PicardSettings& st, const VecX& z0, double blowup) {
    SimulationResult r;
    Trajectory last;
    try {
        FixedPointResult fp = fixed_point_solve(pb, st, z0, &last);
        r.traj = std::move(fp.traj);
        r.log = std::move(fp.log);
        r.map = std::move(fp.map);
        r.status = RunStatus::Global;
        r.message = "horizon reached";
    } catch (const ContactError& e) {
        r.traj = truncate(last, e.level());
        r.status = RunStatus::Contact;
        r.t_contact = e.time();
        r.message = "body_distance fell below beta/2";
    } catch (const NonContractionError& e) {
        r.log = e.log();
        r.traj = last;
        r.status = RunStatus::BlowupNorm;
        r.message = e.what();
    }
    if (r.status == RunStatus::Global) {
        for (int n = 0; n < r.traj.levels(); ++n) {
            const double vmax = r.traj.z[n].cwiseAbs().maxCoeff();
            if (!std::isfinite(vmax) || vmax > blowup) {
                r.status = RunStatus::BlowupNorm;
                r.message = "velocity monitor exceeded the blow-up threshold";
                r.traj = truncate(r.traj, n);
                break;
            }
        }
    }
    fill_series(pb, st, r);
    if (r.status == RunStatus::Contact) {
        for (size_t n = 0; n < r.distance.size(); ++n)
            if (r.distance[n] < 0.5 * pb.domain->beta) {
                r.t_contact = r.traj.t[n];
                break;
            }
    }
    if (st.nonlinear_slip && r.status == RunStatus::Global)
        r.slip_residual = wall_law_residual(pb, r.traj, r.map ? &*r.map : nullptr);
    return r;
}

}  // namespace slipfsi
