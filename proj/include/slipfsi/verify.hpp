#pragma once

#include "slipfsi/picard.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace slipfsi {

struct CheckEntry {
    std::string suite;
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    std::string relation;  // "<=", ">=", "<", ">"
    bool pass = false;
};

struct VerifyReport {
    std::vector<CheckEntry> entries;

    void add(const std::string& suite, const std::string& name, double value, const std::string& relation,
             double threshold);
    bool all_pass() const;
    nlohmann::ordered_json to_json() const;
    void print(std::ostream& os) const;
};

const std::vector<std::string>& verify_suites();

/// Runs one suite ("transform", "operator", "spectral", "nonnewtonian") or
/// "all" on the given problem. Failures are report entries, never throws
/// for a failed check.
VerifyReport run_verify(const std::string& suite, const Problem& pb, const SpectrumOptions& spec = {});

/// Central-difference divergence of Lambda at x with step h.
double fd_div_lambda(const SpatialMotion& m, const CutoffPsi& psi, const Vec3& x, double h);
/// Row divergence of cof J_X at reference point y and level n, with the
/// derivatives of the traced Jacobian taken by central differences of step h.
Vec3 fd_piola_divergence(const FlowMap& map, const Vec3& y, int n, double h);
/// Same, from the second variational equation (needs second_order).
Vec3 piola_divergence(const PointJet& jet);

}  // namespace slipfsi
