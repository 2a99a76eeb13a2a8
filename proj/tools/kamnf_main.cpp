// kamnf: scenario runner for the KAM normal-form engine.
#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "kamnf/scenario.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    int threads = 1;
};

void attach(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "path to the JSON config")->required();
    sub->add_option("--out", args.out_dir, "output directory for artifacts");
    sub->add_option("--threads", args.threads, "scenario-level worker count")
        ->check(CLI::Range(1, 64));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"KAM normal-form engine for the truncated nonlinear wave equation"};
    app.require_subcommand(1);

    CommonArgs args;
    CLI::App* audit = app.add_subcommand("audit", "nonresonance condition checks for the seeded omega");
    CLI::App* measure = app.add_subcommand("measure", "Monte Carlo gamma-scaling study of the resonant set");
    CLI::App* kam = app.add_subcommand("kam", "full KAM iteration with frequency freezing");
    CLI::App* verify = app.add_subcommand("verify", "torus flow and linear stability verification");
    for (CLI::App* sub : {audit, measure, kam, verify}) attach(sub, args);

    CLI11_PARSE(app, argc, argv);

    try {
        kamnf::Config cfg = kamnf::Config::from_file(args.config_path);
        if (audit->parsed()) return kamnf::run_audit(cfg, args.out_dir);
        if (measure->parsed()) return kamnf::run_measure(cfg, args.out_dir, args.threads);
        if (kam->parsed()) return kamnf::run_kam(cfg, args.out_dir);
        if (verify->parsed()) return kamnf::run_verify(cfg, args.out_dir);
    } catch (const kamnf::ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kamnf::kConfigError;
    } catch (const kamnf::ResonanceError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kamnf::kResonanceError;
    } catch (const kamnf::FreezeError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kamnf::kContractionError;
    } catch (const kamnf::IntegratorError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kamnf::kIntegratorError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
