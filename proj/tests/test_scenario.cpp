#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kamnf/scenario.hpp"

using namespace kamnf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "kamnf_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// small, fast configuration shared by the scenario tests
Config small_config() {
    Config cfg = Config::from_json_string("{}");
    cfg.max_mode = 3;
    cfg.max_degree = 4;
    cfg.max_steps = 1;
    cfg.seed = 3;
    cfg.measure.l = 2;
    cfg.measure.s = 2;
    cfg.measure.samples = 1000;
    cfg.measure.gammas = {0.02, 0.1};
    cfg.integrator.h = 2e-3;
    cfg.integrator.t = 5.0;
    return cfg;
}

} // namespace

TEST_CASE("config defaults and validation") {
    Config cfg = Config::from_json_string("{}");
    CHECK(cfg.theta == 0.5);
    CHECK(cfg.max_mode == 6);
    CHECK(cfg.measure.gammas.size() == 3);

    CHECK_THROWS_WITH_AS(Config::from_json_string(R"({"theta": 1.5})"),
                         doctest::Contains("theta"), ConfigError);
    CHECK_THROWS_WITH_AS(Config::from_json_string(R"({"gamma": 0.0})"),
                         doctest::Contains("gamma"), ConfigError);
    CHECK_THROWS_WITH_AS(Config::from_json_string(R"({"rho": 0.5})"), doctest::Contains("r"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(Config::from_json_string(R"({"maxDegree": 2})"),
                         doctest::Contains("maxDegree"), ConfigError);
    CHECK_THROWS_WITH_AS(Config::from_json_string(R"({"measure": {"samples": 10}})"),
                         doctest::Contains("measure.samples"), ConfigError);
    CHECK_THROWS_WITH_AS(Config::from_json_string("not json"), doctest::Contains("JSON"),
                         ConfigError);

    // resolved form re-parses to the same hash
    Config back = Config::from_json_string(cfg.to_json_string());
    CHECK(back.content_hash() == cfg.content_hash());
}

TEST_CASE("audit artifacts and exit codes") {
    Config cfg = small_config();
    fs::path dir = fresh_dir("audit_a");
    int code = run_audit(cfg, dir);
    CHECK(fs::exists(dir / "audit.json"));
    std::string a = slurp(dir / "audit.json");
    CHECK(a.find("\"schema\": 1") != std::string::npos);
    CHECK(a.find(cfg.content_hash()) != std::string::npos);

    // rerun is byte-identical
    fs::path dir2 = fresh_dir("audit_b");
    int code2 = run_audit(cfg, dir2);
    CHECK(code == code2);
    CHECK(slurp(dir2 / "audit.json") == a);

    // a near-1 gamma makes the seeded omega resonant: distinct exit code
    Config bad = cfg;
    bad.gamma = 0.999;
    fs::path dir3 = fresh_dir("audit_c");
    CHECK(run_audit(bad, dir3) == kResonanceError);
}

TEST_CASE("measure artifacts are deterministic") {
    Config cfg = small_config();
    fs::path a = fresh_dir("measure_a");
    fs::path b = fresh_dir("measure_b");
    CHECK(run_measure(cfg, a) == kOk);
    CHECK(run_measure(cfg, b, 2) == kOk);
    CHECK(slurp(a / "measure.json") == slurp(b / "measure.json"));
    CHECK(slurp(a / "measure.csv") == slurp(b / "measure.csv"));
    std::string csv = slurp(a / "measure.csv");
    CHECK(csv.rfind("gamma,fraction,ci\n", 0) == 0);

    // oversized grid trips the enumeration budget as a config error
    Config big = cfg;
    big.max_mode = 24;
    big.measure.l = 3;
    big.measure.s = 5;
    CHECK_THROWS_AS(run_measure(big, fresh_dir("measure_c")), ConfigError);
}

TEST_CASE("kam artifacts") {
    Config cfg = small_config();
    fs::path dir = fresh_dir("kam_a");
    int code = run_kam(cfg, dir);
    CHECK(code == kOk);
    for (const char* name : {"report.json", "steps.csv", "rfinal.json", "rstep_1.json"})
        CHECK(fs::exists(dir / name));
    std::string csv = slurp(dir / "steps.csv");
    CHECK(csv.rfind("step,rho_s,B_s,norm_r0,norm_r1,norm_r2,max_shift,v_drift,dropped_mass\n", 0) == 0);

    // the serialized snapshot round-trips
    HamiltonianPoly snap = poly_from_json_string(slurp(dir / "rstep_1.json"));
    CHECK(snap.basis() == Basis::Adapted);

    fs::path dir2 = fresh_dir("kam_b");
    CHECK(run_kam(cfg, dir2) == kOk);
    CHECK(slurp(dir2 / "report.json") == slurp(dir / "report.json"));
    CHECK(slurp(dir2 / "steps.csv") == csv);
    CHECK(slurp(dir2 / "rfinal.json") == slurp(dir / "rfinal.json"));
}

TEST_CASE("verify artifacts") {
    Config cfg = small_config();
    fs::path dir = fresh_dir("verify_a");
    int code = run_verify(cfg, dir);
    CHECK(code == kOk);
    for (const char* name : {"verify.json", "trajectory.csv", "spectrum.json"})
        CHECK(fs::exists(dir / name));
    std::string head = slurp(dir / "trajectory.csv").substr(0, 200);
    CHECK(head.rfind("t,action_1,action_2,action_3,phase_1,phase_2,phase_3\n", 0) == 0);

    fs::path dir2 = fresh_dir("verify_b");
    CHECK(run_verify(cfg, dir2) == kOk);
    CHECK(slurp(dir2 / "verify.json") == slurp(dir / "verify.json"));
    CHECK(slurp(dir2 / "trajectory.csv") == slurp(dir / "trajectory.csv"));
    CHECK(slurp(dir2 / "spectrum.json") == slurp(dir / "spectrum.json"));
}
