#include "slipfsi/config.hpp"

#include "slipfsi/mesh_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace slipfsi {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kSchema = "slipfsi-run v1";

/// Object reader that records consumed keys so leftovers can be rejected.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_, "expected an object");
    }

    [[noreturn]] static void fail(const std::string& path, const std::string& msg) {
        throw ConfigError(path + ": " + msg);
    }
    std::string key(const std::string& k) const { return path_ + "." + k; }
    bool has(const std::string& k) {
        seen_.insert(k);
        return j_.contains(k);
    }

    double number(const std::string& k, double def) {
        if (!has(k)) return def;
        const json& v = j_.at(k);
        if (!v.is_number()) fail(key(k), "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(key(k), "expected a finite number");
        return x;
    }
    double positive(const std::string& k, double def) {
        const double x = number(k, def);
        if (!(x > 0.0)) fail(key(k), "must be positive");
        return x;
    }
    int integer(const std::string& k, int def, int min) {
        if (!has(k)) return def;
        const json& v = j_.at(k);
        if (!v.is_number_integer()) fail(key(k), "expected an integer");
        const long long x = v.get<long long>();
        if (x < min || x > 1000000000) fail(key(k), "must be >= " + std::to_string(min));
        return static_cast<int>(x);
    }
    bool boolean(const std::string& k, bool def) {
        if (!has(k)) return def;
        const json& v = j_.at(k);
        if (!v.is_boolean()) fail(key(k), "expected true or false");
        return v.get<bool>();
    }
    std::string string(const std::string& k, const std::string& def) {
        if (!has(k)) return def;
        const json& v = j_.at(k);
        if (!v.is_string()) fail(key(k), "expected a string");
        return v.get<std::string>();
    }
    Vec3 vec3(const std::string& k, const Vec3& def) {
        if (!has(k)) return def;
        const json& v = j_.at(k);
        if (!v.is_array() || v.size() != 3) fail(key(k), "expected an array of 3 numbers");
        Vec3 out;
        for (int i = 0; i < 3; ++i) {
            if (!v[i].is_number()) fail(key(k) + "[" + std::to_string(i) + "]", "expected a number");
            out[i] = v[i].get<double>();
            if (!std::isfinite(out[i])) fail(key(k) + "[" + std::to_string(i) + "]", "expected a finite number");
        }
        return out;
    }
    /// Sub-object, or an empty object when absent.
    Section child(const std::string& k) {
        static const json empty = json::object();
        return has(k) ? Section(j_.at(k), key(k)) : Section(empty, key(k));
    }
    const json* raw(const std::string& k) {
        return has(k) ? &j_.at(k) : nullptr;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) fail(key(it.key()), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

}  // namespace

const char* slip_law_name(RunConfig::SlipLaw s) {
    return s == RunConfig::SlipLaw::Linear ? "linear" : "nonlinear";
}

int RunConfig::steps() const {
    const double n = T / dt;
    const long long k = std::llround(n);
    if (std::abs(n - static_cast<double>(k)) > 1e-9 * std::max(1.0, n))
        throw ConfigError("config.time.T: must be an integer multiple of time.dt");
    return static_cast<int>(k);
}

PicardSettings RunConfig::settings(double eta_value) const {
    PicardSettings st;
    st.dt = dt;
    st.steps = steps();
    st.model = viscosity;
    st.nonlinear_slip = slip_law == SlipLaw::Nonlinear;
    st.gamma = gamma;
    st.eta = eta_value;
    st.p = p;
    st.tol = tol;
    st.max_iter = max_iter;
    st.gate = gate;
    st.volterra = volterra;
    st.volterra_tol = volterra_tol;
    st.volterra_max_iter = volterra_max_iter;
    st.flow = flow;
    return st;
}

RunConfig parse_config(const json& j) {
    RunConfig c;
    Section root(j, "config");
    if (root.has("schema")) {
        const json& s = j.at("schema");
        if (!s.is_string() || s.get<std::string>() != kSchema)
            Section::fail("config.schema", std::string("expected \"") + kSchema + "\"");
    }
    c.geometry = root.string("geometry", c.geometry);
    if (c.geometry.empty()) Section::fail("config.geometry", "must not be empty");
    c.density = root.positive("density", c.density);

    {
        Section v = root.child("viscosity");
        const std::string kind = v.string("kind", kind_name(c.viscosity.kind));
        try {
            c.viscosity.kind = parse_viscosity_kind(kind);
        } catch (const std::exception&) {
            Section::fail(v.key("kind"), "unknown value '" + kind + "' (newtonian, carreau, power_law)");
        }
        c.viscosity.mu0 = v.positive("mu0", c.viscosity.mu0);
        c.viscosity.d = v.positive("d", c.viscosity.d);
        if (c.viscosity.kind == ViscosityModel::Kind::Newtonian && c.viscosity.d != 2.0)
            Section::fail(v.key("d"), "must be 2 for the newtonian model");
        v.finish();
    }
    {
        Section s = root.child("slip");
        const std::string law = s.string("law", slip_law_name(c.slip_law));
        if (law == "linear")
            c.slip_law = RunConfig::SlipLaw::Linear;
        else if (law == "nonlinear")
            c.slip_law = RunConfig::SlipLaw::Nonlinear;
        else
            Section::fail(s.key("law"), "unknown value '" + law + "' (linear, nonlinear)");
        c.alpha = s.number("alpha", c.alpha);
        if (c.alpha < 0.0) Section::fail(s.key("alpha"), "must be nonnegative");
        s.finish();
    }
    {
        Section s = root.child("initial");
        c.initial.l0 = s.vec3("l0", c.initial.l0);
        c.initial.omega0 = s.vec3("omega0", c.initial.omega0);
        c.initial.compat_tol = s.positive("compat_tol", c.initial.compat_tol);
        Section u = s.child("u0");
        const std::string kind = u.string("kind", "lifting");
        if (kind == "lifting") {
            c.initial.u0 = RunConfig::Initial::Velocity::Lifting;
        } else if (kind == "file") {
            c.initial.u0 = RunConfig::Initial::Velocity::File;
            c.initial.u0_path = u.string("path", "");
            if (c.initial.u0_path.empty()) Section::fail(u.key("path"), "required for kind 'file'");
        } else {
            Section::fail(u.key("kind"), "unknown value '" + kind + "' (lifting, file)");
        }
        if (c.initial.u0 == RunConfig::Initial::Velocity::Lifting && u.has("path"))
            Section::fail(u.key("path"), "only allowed for kind 'file'");
        u.finish();
        s.finish();
    }
    {
        Section t = root.child("time");
        c.T = t.positive("T", c.T);
        c.dt = t.positive("dt", c.dt);
        t.finish();
        c.steps();
    }
    {
        Section s = root.child("picard");
        c.gamma = s.positive("gamma", c.gamma);
        if (s.has("eta")) {
            const json& e = j.at("picard").at("eta");
            if (e.is_string() && e.get<std::string>() == "auto")
                c.eta.reset();
            else
                c.eta = s.number("eta", 0.0);
            if (c.eta && !(*c.eta > 0.0)) Section::fail(s.key("eta"), "must be positive or \"auto\"");
        }
        c.p = s.number("p", c.p);
        if (!(c.p > 1.0)) Section::fail(s.key("p"), "must be > 1");
        c.tol = s.positive("tol", c.tol);
        c.max_iter = s.integer("max_iter", c.max_iter, 1);
        c.gate = s.boolean("gate", c.gate);
        c.volterra = s.boolean("volterra", c.volterra);
        c.volterra_tol = s.positive("volterra_tol", c.volterra_tol);
        c.volterra_max_iter = s.integer("volterra_max_iter", c.volterra_max_iter, 1);
        c.blowup = s.positive("blowup", c.blowup);
        s.finish();
        if (c.volterra && c.viscosity.is_newtonian())
            Section::fail(s.key("volterra"), "only used by the generalized (non-newtonian) pipeline");
    }
    {
        Section f = root.child("flow");
        c.flow.det_tol = f.positive("det_tol", c.flow.det_tol);
        c.flow.dt_min = f.positive("dt_min", c.flow.dt_min);
        c.flow.reortho_tol = f.positive("reortho_tol", c.flow.reortho_tol);
        f.finish();
    }
    {
        Section s = root.child("spectrum");
        c.spectrum.count = s.integer("count", c.spectrum.count, 1);
        c.spectrum.block = s.integer("block", c.spectrum.block, 1);
        c.spectrum.max_restarts = s.integer("max_restarts", c.spectrum.max_restarts, 1);
        c.spectrum.krylov_blocks = s.integer("krylov_blocks", c.spectrum.krylov_blocks, 1);
        c.spectrum.tol = s.positive("tol", c.spectrum.tol);
        c.spectrum.seed = static_cast<unsigned>(s.integer("seed", static_cast<int>(c.spectrum.seed), 0));
        s.finish();
    }
    {
        Section o = root.child("output");
        c.output.dir = o.string("dir", c.output.dir);
        if (c.output.dir.empty()) Section::fail(o.key("dir"), "must not be empty");
        c.output.snapshots = o.boolean("snapshots", c.output.snapshots);
        c.output.snapshot_every = o.integer("snapshot_every", c.output.snapshot_every, 1);
        o.finish();
    }
    root.finish();

    try {
        c.viscosity.validate();
    } catch (const std::exception& e) {
        Section::fail("config.viscosity", e.what());
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": malformed JSON: " + e.what());
    }
    return parse_config(j);
}

json to_json(const RunConfig& c) {
    json j;
    j["schema"] = kSchema;
    j["geometry"] = c.geometry;
    j["density"] = c.density;
    j["viscosity"] = {{"kind", kind_name(c.viscosity.kind)}, {"mu0", c.viscosity.mu0}, {"d", c.viscosity.d}};
    j["slip"] = {{"law", slip_law_name(c.slip_law)}, {"alpha", c.alpha}};
    json u0 = {{"kind", c.initial.u0 == RunConfig::Initial::Velocity::Lifting ? "lifting" : "file"}};
    if (c.initial.u0 == RunConfig::Initial::Velocity::File) u0["path"] = c.initial.u0_path;
    j["initial"] = {{"l0", vec_json(c.initial.l0)},
                    {"omega0", vec_json(c.initial.omega0)},
                    {"u0", u0},
                    {"compat_tol", c.initial.compat_tol}};
    j["time"] = {{"T", c.T}, {"dt", c.dt}};
    json pic;
    pic["gamma"] = c.gamma;
    pic["eta"] = c.eta ? json(*c.eta) : json("auto");
    pic["p"] = c.p;
    pic["tol"] = c.tol;
    pic["max_iter"] = c.max_iter;
    pic["gate"] = c.gate;
    pic["volterra"] = c.volterra;
    pic["volterra_tol"] = c.volterra_tol;
    pic["volterra_max_iter"] = c.volterra_max_iter;
    pic["blowup"] = c.blowup;
    j["picard"] = pic;
    j["flow"] = {{"det_tol", c.flow.det_tol}, {"dt_min", c.flow.dt_min}, {"reortho_tol", c.flow.reortho_tol}};
    j["spectrum"] = {{"count", c.spectrum.count},
                     {"block", c.spectrum.block},
                     {"max_restarts", c.spectrum.max_restarts},
                     {"krylov_blocks", c.spectrum.krylov_blocks},
                     {"tol", c.spectrum.tol},
                     {"seed", c.spectrum.seed}};
    j["output"] = {{"dir", c.output.dir},
                   {"snapshots", c.output.snapshots},
                   {"snapshot_every", c.output.snapshot_every}};
    return j;
}

VecX read_vertex_field(const std::string& path, const FluidSpace& s) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open field file '" + path + "'");
    std::string header;
    std::getline(in, header);
    if (header.rfind("slipfsi-field v1", 0) != 0) throw ConfigError(path + ": expected header 'slipfsi-field v1'");
    std::string word;
    int n = -1;
    if (!(in >> word >> n) || word != "vertices") throw ConfigError(path + ": expected 'vertices N'");
    if (n != s.nv())
        throw ConfigError(path + ": field has " + std::to_string(n) + " vertices, mesh has " + std::to_string(s.nv()));
    VecX raw = VecX::Zero(s.raw_size());
    for (int v = 0; v < n; ++v)
        for (int c = 0; c < 3; ++c)
            if (!(in >> raw[s.raw_vertex(v, c)]))
                throw ConfigError(path + ": truncated at vertex " + std::to_string(v));
    return raw;
}

Problem make_problem(const RunConfig& c) {
    return Problem::create(load_geometry(c.geometry, c.alpha), c.viscosity.mu0, c.density);
}

VecX initial_state(const Problem& pb, const RunConfig& c) {
    Vec6 xi;
    xi << c.initial.l0, c.initial.omega0;
    if (c.initial.u0 == RunConfig::Initial::Velocity::Lifting) return pb.solver->steady_lifting(xi).z;

    const FluidSpace& s = *pb.space;
    const VecX raw = read_vertex_field(c.initial.u0_path, s);
    const CompatibilityReport rep =
        check_compatibility(*pb.solver, raw, c.initial.l0, c.initial.omega0, c.p, c.initial.compat_tol);
    if (!rep.ok) {
        std::string msg = "config.initial.u0: incompatible initial data:";
        for (const auto& v : rep.violations) msg += " " + v;
        throw ConfigError(msg);
    }
    VecX rigid = VecX::Zero(s.nz());
    rigid.tail<6>() = xi;
    VecX z(s.nz());
    z.head(s.nfree()) = s.free_from_raw(raw - s.to_raw(rigid), std::numeric_limits<double>::infinity());
    z.tail<6>() = xi;
    return z;
}

}  // namespace slipfsi
