#include "kamnf/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "kamnf/rng.hpp"

namespace kamnf {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void bad_field(const std::string& field, const std::string& what) {
    throw ConfigError("config error: " + field + " " + what);
}

double require_number(const nlohmann::json& j, const std::string& field) {
    if (!j.is_number()) bad_field(field, "must be a number");
    return j.get<double>();
}

long require_integer(const nlohmann::json& j, const std::string& field) {
    if (!j.is_number_integer()) bad_field(field, "must be an integer");
    return j.get<long>();
}

} // namespace

Config Config::from_json_string(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config error: not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config error: top level must be an object");

    Config cfg;
    if (doc.contains("theta")) cfg.theta = require_number(doc["theta"], "theta");
    if (!(cfg.theta > 0.0 && cfg.theta < 1.0)) bad_field("theta", "must lie in (0,1)");
    if (doc.contains("r")) cfg.r = require_number(doc["r"], "r");
    if (!(cfg.r > 0.0)) bad_field("r", "must be > 0");
    if (doc.contains("rho")) cfg.rho = require_number(doc["rho"], "rho");
    if (!(cfg.rho > 0.0)) bad_field("rho", "must be > 0");
    if (!(cfg.r > 100.0 * cfg.rho / (2.0 - std::pow(2.0, cfg.theta))))
        bad_field("r", "must exceed 100 rho / (2 - 2^theta)");
    if (doc.contains("gamma")) cfg.gamma = require_number(doc["gamma"], "gamma");
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) bad_field("gamma", "must lie in (0,1)");
    if (doc.contains("epsilon")) cfg.epsilon = require_number(doc["epsilon"], "epsilon");
    if (!(cfg.epsilon >= 0.0 && cfg.epsilon < 1.0)) bad_field("epsilon", "must lie in [0,1)");
    if (doc.contains("maxMode")) cfg.max_mode = static_cast<int>(require_integer(doc["maxMode"], "maxMode"));
    if (cfg.max_mode < 1 || cfg.max_mode > 64) bad_field("maxMode", "must lie in [1,64]");
    if (doc.contains("maxDegree"))
        cfg.max_degree = static_cast<int>(require_integer(doc["maxDegree"], "maxDegree"));
    if (cfg.max_degree < 4) bad_field("maxDegree", "must be >= 4");
    if (doc.contains("maxSteps")) cfg.max_steps = static_cast<int>(require_integer(doc["maxSteps"], "maxSteps"));
    if (cfg.max_steps < 0) bad_field("maxSteps", "must be >= 0");
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_integer()) bad_field("seed", "must be an integer");
        cfg.seed = doc["seed"].get<std::uint64_t>();
    }
    if (doc.contains("tolerances")) {
        const auto& t = doc["tolerances"];
        if (!t.is_object()) bad_field("tolerances", "must be an object");
        if (t.contains("newton")) cfg.tolerances.newton = require_number(t["newton"], "tolerances.newton");
        if (t.contains("residual"))
            cfg.tolerances.residual = require_number(t["residual"], "tolerances.residual");
        if (t.contains("drift")) cfg.tolerances.drift = require_number(t["drift"], "tolerances.drift");
    }
    if (!(cfg.tolerances.newton > 0.0)) bad_field("tolerances.newton", "must be > 0");
    if (!(cfg.tolerances.residual > 0.0)) bad_field("tolerances.residual", "must be > 0");
    if (!(cfg.tolerances.drift > 0.0)) bad_field("tolerances.drift", "must be > 0");
    if (doc.contains("integrator")) {
        const auto& t = doc["integrator"];
        if (!t.is_object()) bad_field("integrator", "must be an object");
        if (t.contains("h")) cfg.integrator.h = require_number(t["h"], "integrator.h");
        if (t.contains("T")) cfg.integrator.t = require_number(t["T"], "integrator.T");
    }
    if (!(cfg.integrator.h > 0.0)) bad_field("integrator.h", "must be > 0");
    if (!(cfg.integrator.h * (cfg.max_mode + 1) < 0.5))
        bad_field("integrator.h", "must satisfy h * max lambda < 0.5");
    if (!(cfg.integrator.t >= 0.0)) bad_field("integrator.T", "must be >= 0");
    if (doc.contains("measure")) {
        const auto& m = doc["measure"];
        if (!m.is_object()) bad_field("measure", "must be an object");
        if (m.contains("L")) cfg.measure.l = static_cast<int>(require_integer(m["L"], "measure.L"));
        if (m.contains("S")) cfg.measure.s = static_cast<int>(require_integer(m["S"], "measure.S"));
        if (m.contains("samples")) cfg.measure.samples = require_integer(m["samples"], "measure.samples");
        if (m.contains("gammas")) {
            if (!m["gammas"].is_array() || m["gammas"].empty())
                bad_field("measure.gammas", "must be a nonempty array");
            cfg.measure.gammas.clear();
            for (const auto& g : m["gammas"])
                cfg.measure.gammas.push_back(require_number(g, "measure.gammas"));
        }
    }
    if (cfg.measure.l < 1) bad_field("measure.L", "must be >= 1");
    if (cfg.measure.s < 1) bad_field("measure.S", "must be >= 1");
    if (cfg.measure.samples < 1000) bad_field("measure.samples", "must be >= 1000");
    for (double g : cfg.measure.gammas)
        if (!(g >= 0.0 && g < 1.0)) bad_field("measure.gammas", "entries must lie in [0,1)");
    return cfg;
}

Config Config::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config error: cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_string(buf.str());
}

namespace {

ordered_json config_json(const Config& cfg) {
    ordered_json j;
    j["theta"] = cfg.theta;
    j["r"] = cfg.r;
    j["rho"] = cfg.rho;
    j["gamma"] = cfg.gamma;
    j["epsilon"] = cfg.epsilon;
    j["maxMode"] = cfg.max_mode;
    j["maxDegree"] = cfg.max_degree;
    j["maxSteps"] = cfg.max_steps;
    j["seed"] = cfg.seed;
    j["tolerances"] = {{"newton", cfg.tolerances.newton},
                       {"residual", cfg.tolerances.residual},
                       {"drift", cfg.tolerances.drift}};
    j["integrator"] = {{"h", cfg.integrator.h}, {"T", cfg.integrator.t}};
    j["measure"] = {{"L", cfg.measure.l},
                    {"S", cfg.measure.s},
                    {"samples", cfg.measure.samples},
                    {"gammas", cfg.measure.gammas}};
    return j;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string csv_num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

ordered_json artifact_header(const Config& cfg, const char* scenario) {
    ordered_json doc;
    doc["schema"] = 1;
    doc["scenario"] = scenario;
    doc["config"] = config_json(cfg);
    doc["config_hash"] = cfg.content_hash();
    return doc;
}

struct AuditSummary {
    long total = 0;
    long cond1_failures = 0;
    long cond2_applicable = 0;
    long cond2_failures = 0;
    double min_margin1 = std::numeric_limits<double>::infinity();
    double min_margin2 = std::numeric_limits<double>::infinity();
    bool nonresonant = true;
};

AuditSummary audit_conditions(const Config& cfg, const FrequencyModel& fm) {
    AuditSummary sum;
    std::vector<SignedIndex> grid = enumerate_indices(cfg.max_mode, cfg.measure.l, cfg.measure.s);
    sum.total = static_cast<long>(grid.size());
    for (const SignedIndex& l : grid) {
        ConditionResult c1 = check_condition_1(fm, l, cfg.gamma);
        sum.min_margin1 = std::min(sum.min_margin1, c1.margin);
        if (!c1.pass) ++sum.cond1_failures;
        ConditionResult c2 = check_condition_2(fm, l, cfg.gamma);
        if (c2.applicable) {
            ++sum.cond2_applicable;
            sum.min_margin2 = std::min(sum.min_margin2, c2.margin);
            if (!c2.pass) ++sum.cond2_failures;
        }
    }
    sum.nonresonant = sum.cond1_failures == 0 && sum.cond2_failures == 0;
    return sum;
}

ordered_json audit_json(const AuditSummary& sum) {
    ordered_json a;
    a["total_indices"] = sum.total;
    a["cond1_failures"] = sum.cond1_failures;
    a["cond1_min_margin"] = sum.min_margin1;
    a["cond2_applicable"] = sum.cond2_applicable;
    a["cond2_failures"] = sum.cond2_failures;
    a["cond2_min_margin"] = sum.cond2_applicable > 0 ? sum.min_margin2 : 0.0;
    a["nonresonant"] = sum.nonresonant;
    return a;
}

} // namespace

std::string Config::to_json_string() const { return config_json(*this).dump(2) + "\n"; }

std::string Config::content_hash() const { return fnv1a_hex(config_json(*this).dump()); }

int run_audit(const Config& cfg, const std::filesystem::path& outdir) {
    std::vector<double> omega = sample_omega(cfg.seed, cfg.max_mode);
    FrequencyModel fm = FrequencyModel::from_omega(omega);
    AuditSummary sum = audit_conditions(cfg, fm);

    ordered_json doc = artifact_header(cfg, "audit");
    doc["omega"] = omega;
    doc["audit"] = audit_json(sum);
    write_text(outdir / "audit.json", doc.dump(2) + "\n");
    return sum.nonresonant ? kOk : kResonanceError;
}

int run_measure(const Config& cfg, const std::filesystem::path& outdir, int threads) {
    MeasureGrid grid;
    grid.max_mode = cfg.max_mode;
    grid.max_entry = cfg.measure.l;
    grid.max_support = cfg.measure.s;
    grid.samples = cfg.measure.samples;
    grid.seed = cfg.seed;
    std::vector<MeasureResult> results;
    try {
        results = measure_scan(cfg.measure.gammas, grid, threads);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config error: ") + e.what());
    }

    ordered_json doc = artifact_header(cfg, "measure");
    auto arr = ordered_json::array();
    std::string csv = "gamma,fraction,ci\n";
    for (const MeasureResult& r : results) {
        ordered_json item;
        item["gamma"] = r.gamma;
        item["N"] = grid.max_mode;
        item["L"] = grid.max_entry;
        item["S"] = grid.max_support;
        item["samples"] = r.samples;
        item["fraction"] = r.fraction;
        item["ci"] = r.ci;
        item["failures_by_condition"] = {{"cond1", r.cond1_failures}, {"cond2", r.cond2_failures}};
        arr.push_back(std::move(item));
        csv += csv_num(r.gamma) + "," + csv_num(r.fraction) + "," + csv_num(r.ci) + "\n";
    }
    doc["results"] = std::move(arr);
    write_text(outdir / "measure.json", doc.dump(2) + "\n");
    write_text(outdir / "measure.csv", csv);
    return kOk;
}

KamRunResult kam_pipeline(const Config& cfg) {
    NlwConfig ncfg;
    ncfg.max_mode = cfg.max_mode;
    ncfg.max_degree = cfg.max_degree;
    ncfg.eps = cfg.epsilon;
    ncfg.r = cfg.r;
    ncfg.theta = cfg.theta;
    ncfg.h = cfg.integrator.h;
    ncfg.horizon = cfg.integrator.t;
    ncfg.validate(cfg.rho);

    KamProblem problem;
    problem.build = [ncfg](const FrequencyModel& fm) { return build_hamiltonian(ncfg, fm); };
    problem.i0 = initial_torus(ncfg);
    problem.omega = sample_omega(cfg.seed, cfg.max_mode);

    KamRunOptions opts;
    opts.max_steps = cfg.max_steps;
    opts.eps0 = cfg.epsilon;
    opts.rho = cfg.rho;
    opts.theta = cfg.theta;
    opts.r = cfg.r;
    opts.newton_tol = cfg.tolerances.newton;
    opts.seed = cfg.seed;
    opts.step.r = cfg.r;
    opts.step.seed = cfg.seed;
    return run(problem, opts);
}

namespace {

ordered_json step_json(const KamStepRecord& rec, double eps0) {
    const StepDiag& d = rec.diag;
    ordered_json s;
    s["step"] = d.s + 1;
    s["rho_s"] = d.rho_next;
    s["B_s"] = d.bs;
    s["norm_r0"] = d.norms_after.r0;
    s["norm_r1"] = d.norms_after.r1;
    s["norm_r2"] = d.norms_after.r2;
    s["eps_r0"] = d.eps_r0;
    s["eps_r1"] = d.eps_r1;
    s["eps_r2"] = d.eps_r2;
    s["accepted"] = d.accepted;
    s["residual_rel"] = d.residual_rel;
    s["max_shift"] = d.max_shift;
    s["shift_bound_ratio"] = d.shift_bound_ratio;
    s["v_drift"] = rec.v_drift;
    s["v_drift_bound"] = 2.0 * std::sqrt(std::pow(eps0, std::pow(1.5, d.s)));
    s["phi_displacement"] = d.phi_displacement;
    s["phi_bound"] = std::sqrt(std::pow(eps0, std::pow(1.5, d.s)));
    s["dropped_mass"] = d.dropped_mass;
    s["dropped_count"] = d.dropped_count;
    s["lie_order"] = d.lie_order_used;
    s["lie_tail"] = d.lie_tail;
    s["deferred_keys"] = d.deferred_keys;
    s["case1_keys"] = d.case1_keys;
    s["case2_keys"] = d.case2_keys;
    s["vstar"] = rec.vstar;
    return s;
}

void write_kam_artifacts(const Config& cfg, const KamRunResult& result, const AuditSummary& audit,
                         const std::vector<double>& omega, const std::filesystem::path& outdir) {
    ordered_json doc = artifact_header(cfg, "kam");
    doc["omega"] = omega;
    doc["audit"] = audit_json(audit);
    doc["eps0"] = result.eps0;
    auto steps = ordered_json::array();
    std::string csv = "step,rho_s,B_s,norm_r0,norm_r1,norm_r2,max_shift,v_drift,dropped_mass\n";
    for (const KamStepRecord& rec : result.steps) {
        steps.push_back(step_json(rec, result.eps0));
        const StepDiag& d = rec.diag;
        csv += std::to_string(d.s + 1) + "," + csv_num(d.rho_next) + "," + csv_num(d.bs) + "," +
               csv_num(d.norms_after.r0) + "," + csv_num(d.norms_after.r1) + "," +
               csv_num(d.norms_after.r2) + "," + csv_num(d.max_shift) + "," + csv_num(rec.v_drift) +
               "," + csv_num(d.dropped_mass) + "\n";
    }
    doc["steps"] = std::move(steps);

    double freq_residual = 0.0;
    for (std::size_t n = 0; n < result.lambda_final.size(); ++n)
        freq_residual = std::max(freq_residual,
                                 std::abs(result.lambda_final[n] - (static_cast<double>(n + 1) + omega[n])));
    double eps04 = std::pow(result.eps0, 0.4);
    ordered_json res;
    res["ok"] = result.ok;
    res["failure_code"] = result.failure_code;
    res["failure_detail"] = result.failure_detail;
    res["lambda"] = result.lambda_final;
    res["freq_residual"] = freq_residual;
    res["const_ledger"] = result.const_ledger;
    res["v0star"] = result.v0star;
    res["vstar"] = result.vstar_final;
    res["v_drift_total"] = result.v_drift_total;
    res["v_drift_bound"] = eps04;
    res["r2_norm_10rho"] = result.final_norms_10rho.r2;
    res["r_norm_10rho_max"] = result.final_norms_10rho.max;
    res["r2_bound"] = eps04;
    doc["result"] = std::move(res);

    write_text(outdir / "report.json", doc.dump(2) + "\n");
    write_text(outdir / "steps.csv", csv);
    write_text(outdir / "rfinal.json", to_json_string(result.r_final, 1) + "\n");
    for (const KamStepRecord& rec : result.steps)
        write_text(outdir / ("rstep_" + std::to_string(rec.diag.s + 1) + ".json"),
                   to_json_string(rec.r_snapshot, 1) + "\n");
}

} // namespace

int run_kam(const Config& cfg, const std::filesystem::path& outdir) {
    std::vector<double> omega = sample_omega(cfg.seed, cfg.max_mode);
    AuditSummary audit = audit_conditions(cfg, FrequencyModel::from_omega(omega));
    KamRunResult result = kam_pipeline(cfg);
    write_kam_artifacts(cfg, result, audit, omega, outdir);
    return result.ok ? kOk : result.failure_code;
}

int run_verify(const Config& cfg, const std::filesystem::path& outdir) {
    KamRunResult result = kam_pipeline(cfg);
    if (!result.ok) {
        ordered_json doc = artifact_header(cfg, "verify");
        doc["kam_ok"] = false;
        doc["failure_code"] = result.failure_code;
        doc["failure_detail"] = result.failure_detail;
        write_text(outdir / "verify.json", doc.dump(2) + "\n");
        return result.failure_code;
    }

    NlwConfig ncfg;
    ncfg.max_mode = cfg.max_mode;
    ncfg.max_degree = cfg.max_degree;
    ncfg.eps = cfg.epsilon;
    ncfg.r = cfg.r;
    ncfg.theta = cfg.theta;
    std::vector<double> i0 = initial_torus(ncfg);
    std::vector<double> omega = sample_omega(cfg.seed, cfg.max_mode);
    std::vector<double> targets(cfg.max_mode);
    for (int n = 1; n <= cfg.max_mode; ++n) targets[n - 1] = n + omega[n - 1];

    HamiltonianPoly h_star =
        normal_form(result.lambda_final, result.r_final.truncation()) + to_plain(result.r_final);

    const double h = cfg.integrator.h;
    const double horizon = cfg.integrator.t;
    TorusReport rep = torus_residual(h_star, i0, targets, h, horizon, cfg.seed);
    TorusReport rep_half = torus_residual(h_star, i0, targets, 0.5 * h, horizon, cfg.seed);
    StabilityReport stab = linear_stability(h_star, i0, targets, h, cfg.seed);
    StabilityReport stab_half = linear_stability(h_star, i0, targets, 0.5 * h, cfg.seed);

    // trajectory CSV, ~2000 rows
    std::vector<Complex> z0(cfg.max_mode);
    for (int n = 1; n <= cfg.max_mode; ++n) {
        double phase = 2.0 * std::numbers::pi * rng::uniform01(cfg.seed, rng::kTorusPhase, n);
        z0[n - 1] = std::polar(std::sqrt(i0[n - 1]), phase);
    }
    long steps = static_cast<long>(std::llround(horizon / h));
    int stride = static_cast<int>(std::max(1L, steps / 2000));
    Trajectory traj = flow(h_star, z0, i0, h, horizon, stride);
    std::string csv = "t";
    for (int n = 1; n <= cfg.max_mode; ++n) csv += ",action_" + std::to_string(n);
    for (int n = 1; n <= cfg.max_mode; ++n) csv += ",phase_" + std::to_string(n);
    csv += "\n";
    for (std::size_t j = 0; j < traj.states.size(); ++j) {
        csv += csv_num(traj.times[j]);
        for (int n = 0; n < cfg.max_mode; ++n) csv += "," + csv_num(std::norm(traj.states[j][n]));
        for (int n = 0; n < cfg.max_mode; ++n) csv += "," + csv_num(std::arg(traj.states[j][n]));
        csv += "\n";
    }

    ordered_json spectrum = artifact_header(cfg, "verify-spectrum");
    spectrum["period"] = stab.period;
    spectrum["moduli"] = stab.moduli;
    spectrum["max_deviation"] = stab.max_deviation;
    spectrum["max_deviation_refined"] = stab_half.max_deviation;

    double drift_change = std::abs(rep.max_action_drift - rep_half.max_action_drift);
    double stab_change = std::abs(stab.max_deviation - stab_half.max_deviation);
    bool drift_validated =
        drift_change <= 0.1 * std::max(rep.max_action_drift, 0.1 * cfg.tolerances.drift);
    bool stab_validated = stab_change <= 0.1 * std::max(stab.max_deviation, 1e-5);

    ordered_json doc = artifact_header(cfg, "verify");
    doc["kam_ok"] = true;
    doc["targets"] = targets;
    doc["action_drift"] = rep.max_action_drift;
    doc["action_drift_refined"] = rep_half.max_action_drift;
    doc["drift_tolerance"] = cfg.tolerances.drift;
    doc["drift_validated"] = drift_validated;
    doc["freq_error"] = rep.freq_error;
    doc["freq_error_refined"] = rep_half.freq_error;
    doc["fitted_freqs"] = rep.fitted_freqs;
    doc["energy_drift"] = rep.energy_drift;
    doc["floquet_max_deviation"] = stab.max_deviation;
    doc["floquet_max_deviation_refined"] = stab_half.max_deviation;
    doc["floquet_validated"] = stab_validated;
    bool pass = rep.max_action_drift <= cfg.tolerances.drift && rep.freq_error <= 1e-4 &&
                stab.max_deviation <= 1e-4;
    doc["pass"] = pass;
    write_text(outdir / "verify.json", doc.dump(2) + "\n");
    write_text(outdir / "trajectory.csv", csv);
    write_text(outdir / "spectrum.json", spectrum.dump(2) + "\n");
    return pass ? kOk : kIntegratorError;
}

} // namespace kamnf
