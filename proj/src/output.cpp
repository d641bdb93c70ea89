#include "slipfsi/output.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace slipfsi {

using json = nlohmann::ordered_json;

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write '" + path + "'");
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    return os;
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json array_of(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(finite_or_null(x));
    return a;
}

}  // namespace

void write_run_csv(const std::string& path, const Problem& pb, const SimulationResult& r) {
    std::ofstream os = open_out(path);
    os << "# " << kRunCsvSchema << "\n";
    os << "t,lx,ly,lz,wx,wy,wz,hx,hy,hz,energy,viscous,slip,u_l2,distance\n";
    const int nf = pb.space->nfree();
    const SpMat& Mu = pb.blocks->Mu;
    for (int n = 0; n < r.traj.levels(); ++n) {
        const VecX& z = r.traj.z[n];
        const Vec3 l = z.segment<3>(nf);
        const Vec3 w = z.segment<3>(nf + 3);
        const Vec3 h = n < static_cast<int>(r.h.size()) ? r.h[n] : Vec3::Zero();
        const double dist = n < static_cast<int>(r.distance.size()) ? r.distance[n] : std::nan("");
        os << r.traj.t[n] << ',' << l[0] << ',' << l[1] << ',' << l[2] << ',' << w[0] << ',' << w[1] << ','
           << w[2] << ',' << h[0] << ',' << h[1] << ',' << h[2] << ',' << pb.op->energy(z) << ','
           << pb.op->viscous_dissipation(z) << ',' << pb.op->slip_dissipation(z) << ','
           << std::sqrt(std::max(0.0, z.dot(Mu * z))) << ',' << dist << "\n";
    }
}

json contraction_json(const SimulationResult& r, const PicardSettings& st) {
    const ContractionLog& g = r.log;
    json j;
    j["schema"] = kContractionSchema;
    j["status"] = status_name(r.status);
    j["message"] = r.message;
    j["converged"] = g.converged;
    j["iterations"] = g.iterations;
    j["gamma"] = g.gamma;
    j["gamma0"] = g.gamma0;
    j["eta"] = g.eta;
    j["p"] = st.p;
    j["c_peta"] = g.c_peta;
    j["gate_enabled"] = st.gate;
    j["gate_ok"] = g.gate_ok;
    j["norms"] = array_of(g.norms);
    j["diffs"] = array_of(g.diffs);
    j["ratios"] = array_of(g.ratios);
    j["rhs_norms"] = array_of(g.rhs_norms);
    j["first_rhs_norm"] = g.first_rhs_norm;
    j["lipschitz"] = g.lipschitz;
    j["cn_surrogate"] = g.cn_surrogate;
    j["clip_surrogate"] = g.clip_surrogate;
    j["volterra_iterations"] = g.volterra_iterations;
    j["min_distance"] = r.min_distance;
    j["t_contact"] = r.t_contact >= 0.0 ? json(r.t_contact) : json(nullptr);
    if (r.decay)
        j["decay"] = {{"eta", r.decay->eta}, {"intercept", r.decay->intercept}, {"used", r.decay->used}};
    else
        j["decay"] = nullptr;
    j["slip_residual"] = r.slip_residual >= 0.0 ? json(r.slip_residual) : json(nullptr);
    return j;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream os = open_out(path);
    os << j.dump(2) << "\n";
}

void write_vtk_snapshot(const std::string& path, const FluidSpace& s, const FlowMap& map, int n, const VecX& z,
                        const VecX& p) {
    const SpatialSnapshot snap = pushforward_fields(s, map, n, s.to_raw(z), p);
    const Mesh& m = s.mesh();
    std::ofstream os = open_out(path);
    os << "# vtk DataFile Version 3.0\n";
    os << "slipfsi-snapshot v1 t=" << map.time(n) << "\n";
    os << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << m.num_vertices() << " double\n";
    for (const Vec3& x : snap.x) os << x[0] << ' ' << x[1] << ' ' << x[2] << "\n";
    os << "CELLS " << m.num_tets() << ' ' << 5 * m.num_tets() << "\n";
    for (const auto& t : m.tets) os << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << "\n";
    os << "CELL_TYPES " << m.num_tets() << "\n";
    for (int t = 0; t < m.num_tets(); ++t) os << "10\n";
    os << "POINT_DATA " << m.num_vertices() << "\n";
    os << "VECTORS velocity double\n";
    for (const Vec3& u : snap.u) os << u[0] << ' ' << u[1] << ' ' << u[2] << "\n";
    os << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
    for (int v = 0; v < m.num_vertices(); ++v) os << (v < snap.p.size() ? snap.p[v] : 0.0) << "\n";
}

void write_flowmap_csv(const std::string& path, const FluidSpace& s, const FlowMap& map) {
    std::ofstream os = open_out(path);
    os << "# " << kFlowmapSchema << "\n";
    os << "t,vertex,X,Y,Z,detJ,JminusQ\n";
    const auto& kinds = s.kinds();
    for (int n = 0; n < map.levels(); ++n)
        for (int v = 0; v < map.num_points(); ++v) {
            const Vec3& X = map.X(n, v);
            const Mat3& J = map.J(n, v);
            os << map.time(n) << ',' << v << ',' << X[0] << ',' << X[1] << ',' << X[2] << ',' << J.determinant()
               << ',';
            if (kinds[v] == VertexKind::Solid) os << (J - map.Q(n)).norm();
            os << "\n";
        }
}

void write_matrix_market(const std::string& path, const SpMat& A) {
    std::ofstream os = open_out(path);
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << "\n";
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << "\n";
}

json spectrum_json(const SpectralReport& rep, const SectorBound* sector) {
    json j;
    j["schema"] = kSpectrumSchema;
    json ev = json::array();
    for (size_t k = 0; k < rep.eigenvalues.size(); ++k)
        ev.push_back({{"re", rep.eigenvalues[k].real()},
                      {"im", rep.eigenvalues[k].imag()},
                      {"residual", k < rep.residuals.size() ? finite_or_null(rep.residuals[k]) : json(nullptr)}});
    j["eigenvalues"] = ev;
    j["abscissa"] = rep.abscissa;
    j["eta0"] = rep.eta0;
    j["converged"] = rep.converged;
    j["restarts"] = rep.restarts;
    if (sector) {
        j["sector_bound"] = finite_or_null(sector->bound);
        json grid = json::array();
        for (size_t k = 0; k < sector->samples.size(); ++k)
            grid.push_back({{"re", sector->samples[k].real()},
                            {"im", sector->samples[k].imag()},
                            {"value", finite_or_null(sector->values[k])}});
        j["grid"] = grid;
        j["flagged"] = sector->flagged;
    } else {
        j["sector_bound"] = nullptr;
        j["grid"] = json::array();
    }
    return j;
}

FlowMap trajectory_map(const Problem& pb, const Trajectory& x, const FlowOptions& opt) {
    return FlowMap::build(*pb.domain, pb.domain->mesh.x, x.body(pb.space->nfree()), opt);
}

}  // namespace slipfsi
