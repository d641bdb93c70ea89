#include "slipfsi/config.hpp"
#include "slipfsi/mesh_io.hpp"
#include "slipfsi/output.hpp"
#include "slipfsi/verify.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace slipfsi;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int thread_cap() {
    const char* env = std::getenv("SLIPFSI_THREADS");
    if (!env || !*env) return 1;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1) throw UsageError("SLIPFSI_THREADS must be a positive integer");
    return static_cast<int>(n);
}

RunConfig config_from(const std::string& path) {
    if (path.empty()) return RunConfig{};
    if (!fs::exists(path)) throw UsageError("config file '" + path + "' does not exist");
    return load_config(path);
}

double resolve_eta(const RunConfig& c, const Problem& pb) {
    if (c.eta) return *c.eta;
    const SpectralReport rep = spectrum(*pb.op, c.spectrum);
    if (!(rep.eta0 > 0.0)) throw SolverError("spectral rate is not positive; set picard.eta explicitly");
    return 0.5 * rep.eta0;
}

int cmd_simulate(const std::string& config_path, const std::string& out_override, bool dump_flowmap,
                 bool dump_operators) {
    if (config_path.empty()) throw UsageError("simulate needs --config");
    RunConfig c = config_from(config_path);
    if (!out_override.empty()) c.output.dir = out_override;

    const Problem pb = make_problem(c);
    const VecX z0 = initial_state(pb, c);
    const double eta = resolve_eta(c, pb);
    const PicardSettings st = c.settings(eta);

    const fs::path dir(c.output.dir);
    fs::create_directories(dir);
    write_json((dir / "config.normalized.json").string(), to_json(c));

    SimulationResult r = simulate(pb, st, z0, c.blowup);
    write_run_csv((dir / "run.csv").string(), pb, r);
    write_json((dir / "contraction.json").string(), contraction_json(r, st));

    if (c.output.snapshots || dump_flowmap) {
        const FlowMap map = r.map ? *r.map : trajectory_map(pb, r.traj, c.flow);
        if (c.output.snapshots) {
            fs::create_directories(dir / "snapshots");
            for (int n = 0; n < r.traj.levels(); ++n) {
                if (n % c.output.snapshot_every != 0 && n != r.traj.levels() - 1) continue;
                std::ostringstream name;
                name << "snapshot_" << std::setw(5) << std::setfill('0') << n << ".vtk";
                write_vtk_snapshot((dir / "snapshots" / name.str()).string(), *pb.space, map, n, r.traj.z[n],
                                   r.traj.p[n]);
            }
        }
        if (dump_flowmap) write_flowmap_csv((dir / "flowmap.csv").string(), *pb.space, map);
    }
    if (dump_operators) {
        fs::create_directories(dir / "operators");
        write_matrix_market((dir / "operators" / "MM.mtx").string(), pb.op->MM());
        write_matrix_market((dir / "operators" / "AA.mtx").string(), pb.op->AA());
        write_matrix_market((dir / "operators" / "B.mtx").string(), pb.blocks->B);
    }

    std::cout << "status " << status_name(r.status) << ": " << r.message << "\n";
    std::cout << "levels " << r.traj.levels() << ", picard iterations " << r.log.iterations
              << ", min distance " << r.min_distance << "\n";
    if (r.decay) std::cout << "fitted decay rate " << r.decay->eta << "\n";
    if (r.slip_residual >= 0.0) std::cout << "wall-law residual " << r.slip_residual << "\n";
    return r.status == RunStatus::BlowupNorm && !r.log.converged ? kFailure : kOk;
}

int cmd_verify(const std::string& suite, const std::string& config_path, const std::string& geometry,
               const std::string& json_path) {
    RunConfig c = config_from(config_path);
    if (!geometry.empty()) c.geometry = geometry;
    const Problem pb = make_problem(c);
    const VerifyReport rep = run_verify(suite, pb, c.spectrum);
    rep.print(std::cout);
    if (!json_path.empty()) write_json(json_path, rep.to_json());
    std::cout << (rep.all_pass() ? "all checks passed" : "some checks failed") << "\n";
    return rep.all_pass() ? kOk : kFailure;
}

int cmd_spectrum(const std::string& config_path, const std::string& geometry, int count, bool sector,
                 const std::string& out_path) {
    RunConfig c = config_from(config_path);
    if (!geometry.empty()) c.geometry = geometry;
    if (count > 0) c.spectrum.count = count;
    const Problem pb = make_problem(c);
    const SpectralReport rep = spectrum(*pb.op, c.spectrum);
    std::optional<SectorBound> sb;
    if (sector) sb = sector_bound(*pb.op, sector_grid(1e-2, 1e2, 1), 40);
    const auto j = spectrum_json(rep, sb ? &*sb : nullptr);
    if (out_path.empty())
        std::cout << j.dump(2) << "\n";
    else
        write_json(out_path, j);
    return rep.converged ? kOk : kFailure;
}

int cmd_mesh(const std::string& geometry, const std::string& out_path) {
    const DomainConfig d = load_geometry(geometry);
    if (out_path.empty())
        write_mesh(std::cout, d.mesh);
    else
        write_mesh_file(out_path, d.mesh);
    std::cerr << d.mesh.num_vertices() << " vertices, " << d.mesh.num_tets() << " tets, beta " << d.beta << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"slipfsi: rigid body in a viscous fluid with Navier slip"};
    app.require_subcommand(1);

    std::string config, out, geometry, suite = "all", json_out;
    bool dump_flowmap = false, dump_operators = false, sector = false;
    int count = 0;

    auto* sim = app.add_subcommand("simulate", "Run the fixed-point simulation");
    sim->add_option("--config", config, "Run configuration (JSON)");
    sim->add_option("--out", out, "Output directory (overrides output.dir)");
    sim->add_flag("--dump-flowmap", dump_flowmap, "Write flowmap.csv");
    sim->add_flag("--dump-operators", dump_operators, "Write MM, AA and B in Matrix Market format");

    auto* ver = app.add_subcommand("verify", "Run invariant suites");
    ver->add_option("suite", suite, "transform|operator|spectral|nonnewtonian|all")
        ->check(CLI::IsMember({"transform", "operator", "spectral", "nonnewtonian", "all"}));
    ver->add_option("--config", config, "Run configuration (JSON)");
    ver->add_option("--geometry", geometry, "builtin:shell(r,R,n) or mesh file");
    ver->add_option("--json", json_out, "Also write the report as JSON");

    auto* spec = app.add_subcommand("spectrum", "Rightmost eigenvalues of the coupled operator");
    spec->add_option("--config", config, "Run configuration (JSON)");
    spec->add_option("--geometry", geometry, "builtin:shell(r,R,n) or mesh file");
    spec->add_option("--count", count, "Number of eigenvalues")->check(CLI::PositiveNumber);
    spec->add_flag("--sector", sector, "Also estimate the sector resolvent bound");
    spec->add_option("--out", out, "Write the JSON report here instead of stdout");

    auto* mesh = app.add_subcommand("mesh", "Export a builtin geometry");
    mesh->add_option("--geometry", geometry, "builtin:shell(r,R,n)")->default_val("builtin:shell(1,4,1)");
    mesh->add_option("--out", out, "Mesh file (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        const int threads = thread_cap();
        Eigen::setNbThreads(threads);
        if (*sim) return cmd_simulate(config, out, dump_flowmap, dump_operators);
        if (*ver) return cmd_verify(suite, config, geometry, json_out);
        if (*spec) return cmd_spectrum(config, geometry, count, sector, out);
        if (*mesh) return cmd_mesh(geometry, out);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const GeometryError& e) {
        std::cerr << "geometry error: " << e.what() << "\n";
        return kUsage;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}
