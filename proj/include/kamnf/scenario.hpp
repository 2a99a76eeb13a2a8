// Configuration, the four scenario pipelines (audit / measure / kam /
// verify), and deterministic artifact emission.
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "kamnf/kamdriver.hpp"
#include "kamnf/nlw.hpp"

namespace kamnf {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Config {
    double theta = 0.5;
    double r = 1.0;
    double rho = 0.005;
    double gamma = 0.1;
    double epsilon = 1e-6;
    int max_mode = 6;
    int max_degree = 6;
    int max_steps = 3;
    std::uint64_t seed = 1;
    struct {
        double newton = 1e-12;
        double residual = 1e-12;
        double drift = 1e-3;
    } tolerances;
    struct {
        double h = 5e-4;
        double t = 100.0;
    } integrator;
    struct {
        int l = 3;
        int s = 3;
        long samples = 100000;
        std::vector<double> gammas{0.02, 0.05, 0.1};
    } measure;

    static Config from_json_string(const std::string& text);   // throws ConfigError naming the field
    static Config from_file(const std::filesystem::path& path);
    std::string to_json_string() const;                        // fully resolved, fixed key order
    std::string content_hash() const;                          // fnv1a-64 of the resolved form
};

// exit codes shared by the CLI and the pipelines
enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kResonanceError = 3,
    kContractionError = 4,
    kIntegratorError = 5,
};

int run_audit(const Config& cfg, const std::filesystem::path& outdir);
int run_measure(const Config& cfg, const std::filesystem::path& outdir, int threads = 1);
int run_kam(const Config& cfg, const std::filesystem::path& outdir);
int run_verify(const Config& cfg, const std::filesystem::path& outdir);

// The kam pipeline behind run_kam/run_verify, exposed for tests.
KamRunResult kam_pipeline(const Config& cfg);

} // namespace kamnf
