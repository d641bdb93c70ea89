#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kFixtures = fs::path(SLIPFSI_SOURCE_DIR) / "tests" / "fixtures";

struct Run {
    int code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("slipfsi_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Run cli(const std::string& args, const fs::path& dir, const std::string& env = "") {
    const char* bin = std::getenv("SLIPFSI_BIN");
    REQUIRE(bin != nullptr);
    const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = "cd '" + dir.string() + "' && " + env + " '" + bin + "' " + args + " >'" + out.string() +
                            "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

std::vector<std::vector<double>> csv_rows(const fs::path& p, std::string* header = nullptr) {
    std::ifstream in(p);
    std::string line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line[0] == 't') {
            if (header) *header = line;
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
    const fs::path dir = scratch("usage");
    CHECK(cli("", dir).code == 2);
    CHECK(cli("simulate", dir).code == 2);
    CHECK(cli("simulate --config missing.json", dir).code == 2);
    CHECK(cli("simulate --bogus", dir).code == 2);
    CHECK(cli("spectrum --count 0", dir).code == 2);

    write_file(dir / "broken.json", "{\"geometry\": ");
    CHECK(cli("simulate --config broken.json", dir).code == 2);

    write_file(dir / "typo.json", R"({"picard": {"etta": 0.5}})");
    const Run typo = cli("simulate --config typo.json", dir);
    CHECK(typo.code == 2);
    CHECK(typo.err.find("picard.etta") != std::string::npos);

    write_file(dir / "badgeom.json", R"j({"geometry": "builtin:shell(4,1,0)"})j");
    CHECK(cli("simulate --config badgeom.json", dir).code == 2);

    const Run threads = cli("spectrum --geometry 'builtin:shell(1,4,0)' --count 1", dir, "SLIPFSI_THREADS=abc");
    CHECK(threads.code == 2);
    CHECK(threads.err.find("SLIPFSI_THREADS") != std::string::npos);
}

TEST_CASE("zero data give a zero trajectory") {
    const fs::path dir = scratch("zero");
    const Run r = cli("simulate --config '" + (kFixtures / "zero.json").string() + "' --out out", dir);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("status GLOBAL") != std::string::npos);
    std::string header;
    const auto rows = csv_rows(dir / "out" / "run.csv", &header);
    CHECK(header.rfind("t,lx,ly,lz,wx,wy,wz,hx,hy,hz,energy", 0) == 0);
    REQUIRE(rows.size() == 6);
    for (const auto& row : rows)
        for (size_t k = 1; k + 1 < row.size(); ++k) CHECK(row[k] == 0.0);
}

TEST_CASE("small data run: artifacts, schemas and pinned iteration history") {
    const fs::path dir = scratch("small");
    const Run r = cli("simulate --config '" + (kFixtures / "small.json").string() + "' --out out --dump-flowmap", dir);
    REQUIRE(r.code == 0);
    const fs::path out = dir / "out";

    CHECK(slurp(out / "run.csv").rfind("# slipfsi-run-csv v1\n", 0) == 0);
    CHECK(slurp(out / "flowmap.csv").rfind("# slipfsi-flowmap-csv v1\n", 0) == 0);
    const json cfg = json::parse(slurp(out / "config.normalized.json"));
    CHECK(cfg["schema"] == "slipfsi-run v1");
    const json c = json::parse(slurp(out / "contraction.json"));
    CHECK(c["schema"] == "slipfsi-contraction v1");
    CHECK(c["status"] == "GLOBAL");
    CHECK(c["converged"] == true);
    CHECK(c["gate_ok"] == true);
    CHECK(c["iterations"] == 4);
    CHECK(c["norms"].back().get<double>() == doctest::Approx(0.025291934886737515).epsilon(1e-9));
    for (const auto& q : c["ratios"]) CHECK(q.get<double>() < 1.0);
    const auto& d = c["diffs"];
    for (size_t k = 1; k < d.size(); ++k) CHECK(d[k].get<double>() < d[k - 1].get<double>());
    CHECK(c["eta"].get<double>() > 0.0);
    CHECK(c["decay"]["eta"].get<double>() > 0.0);

    const auto rows = csv_rows(out / "run.csv");
    REQUIRE(rows.size() == 21);
    for (const auto& row : rows) CHECK(row.back() >= 1.5);
    CHECK(rows.back()[10] < rows.front()[10]);

    int snapshots = 0;
    for (const auto& e : fs::directory_iterator(out / "snapshots")) {
        const std::string text = slurp(e.path());
        CHECK(text.rfind("# vtk DataFile", 0) == 0);
        CHECK(text.find("\nslipfsi-snapshot v1 t=") != std::string::npos);
        ++snapshots;
    }
    CHECK(snapshots == 5);
}

TEST_CASE("normalized configuration round-trips") {
    const fs::path dir = scratch("roundtrip");
    REQUIRE(cli("simulate --config '" + (kFixtures / "zero.json").string() + "' --out a", dir).code == 0);
    fs::copy_file(dir / "a" / "config.normalized.json", dir / "again.json");
    REQUIRE(cli("simulate --config again.json --out b", dir).code == 0);
    json a = json::parse(slurp(dir / "a" / "config.normalized.json"));
    json b = json::parse(slurp(dir / "b" / "config.normalized.json"));
    a["output"].erase("dir");
    b["output"].erase("dir");
    CHECK(a == b);
    CHECK(slurp(dir / "a" / "run.csv") == slurp(dir / "b" / "run.csv"));
}

TEST_CASE("spectrum report") {
    const fs::path dir = scratch("spectrum");
    const Run r = cli("spectrum --geometry 'builtin:shell(1,4,0)' --count 1 --out spec.json", dir);
    REQUIRE(r.code == 0);
    const json j = json::parse(slurp(dir / "spec.json"));
    CHECK(j["schema"] == "slipfsi-spectrum v1");
    CHECK(j["eigenvalues"].size() == 1);
    CHECK(j["eta0"].get<double>() > 0.0);
    CHECK(j["converged"] == true);
}

TEST_CASE("mesh export is readable as a geometry") {
    const fs::path dir = scratch("mesh");
    const Run m = cli("mesh --geometry 'builtin:shell(1,4,0)' --out shell.mesh", dir);
    REQUIRE(m.code == 0);
    const Run a = cli("spectrum --geometry shell.mesh --count 1 --out a.json", dir);
    const Run b = cli("spectrum --geometry 'builtin:shell(1,4,0)' --count 1 --out b.json", dir);
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    const double ea = json::parse(slurp(dir / "a.json"))["eta0"].get<double>();
    const double eb = json::parse(slurp(dir / "b.json"))["eta0"].get<double>();
    CHECK(ea == doctest::Approx(eb).epsilon(1e-8));
}

TEST_CASE("verify suites pass on the coarse shell") {
    const fs::path dir = scratch("verify");
    const Run r = cli("verify all --geometry 'builtin:shell(1,4,0)' --json report.json", dir);
    CHECK(r.code == 0);
    CHECK(r.out.find("all checks passed") != std::string::npos);
    const json j = json::parse(slurp(dir / "report.json"));
    CHECK(j.contains("schema"));
}
