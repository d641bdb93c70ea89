#pragma once

#include "slipfsi/picard.hpp"

#include <json.hpp>

#include <optional>
#include <stdexcept>
#include <string>

namespace slipfsi {

/// Schema violation; the message starts with the offending key path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string geometry = "builtin:shell(1,4,1)";
    double density = 1.0;

    ViscosityModel viscosity = ViscosityModel::newtonian(2.0);

    enum class SlipLaw { Linear, Nonlinear };
    SlipLaw slip_law = SlipLaw::Linear;
    double alpha = 1.0;

    struct Initial {
        enum class Velocity { Lifting, File };
        Vec3 l0 = Vec3::Zero();
        Vec3 omega0 = Vec3::Zero();
        Velocity u0 = Velocity::Lifting;
        std::string u0_path;  // File only
        double compat_tol = 1e-8;
    } initial;

    double T = 1.0;
    double dt = 0.01;

    double gamma = 0.1;
    std::optional<double> eta;  // empty: half the spectral rate
    double p = 2.0;
    double tol = 1e-10;
    int max_iter = 40;
    bool gate = true;
    bool volterra = false;
    double volterra_tol = 1e-12;
    int volterra_max_iter = 300;
    double blowup = 1e3;

    FlowOptions flow;
    SpectrumOptions spectrum;

    struct Output {
        std::string dir = "out";
        bool snapshots = true;
        int snapshot_every = 10;
    } output;

    int steps() const;
    PicardSettings settings(double eta) const;
};

const char* slip_law_name(RunConfig::SlipLaw s);

/// Strict parse: unknown keys, wrong types and out-of-range values throw
/// ConfigError with the key path. Missing keys take their defaults.
RunConfig parse_config(const nlohmann::ordered_json& j);
RunConfig load_config(const std::string& path);

/// Every key with its value, in schema order.
nlohmann::ordered_json to_json(const RunConfig& c);

/// Reads the raw vertex velocity file of the initial data:
///   slipfsi-field v1
///   vertices N     followed by N lines "ux uy uz"
/// Bubble coefficients are set to zero.
VecX read_vertex_field(const std::string& path, const FluidSpace& s);

/// Geometry, blocks and coupled operator for the configured physics.
Problem make_problem(const RunConfig& c);

/// Initial state z0. Lifting: the steady slip flow carrying (l0, omega0).
/// File: the given vertex field, which must be compatible with (l0, omega0);
/// incompatible data throw ConfigError listing the violations.
VecX initial_state(const Problem& pb, const RunConfig& c);

}  // namespace slipfsi
