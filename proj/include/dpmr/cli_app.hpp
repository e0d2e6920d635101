#pragma once

// Argument parsing and exit-code mapping for the dpmr tool. Kept apart from
// the command implementations so tests can drive run() in-process.

#include <algorithm>

#include <CLI11.hpp>

#include "dpmr/cli.hpp"

namespace dpmr::cli {

inline int run(std::vector<std::string> args) {
    CLI::App app{"dual-polarity metal-artifact simulation and correction"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::string out_dir;
    std::string config_path;
    int threads = 1;

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate phantom, field and distorted data");
    std::string spec_path;
    sim->add_option("spec", spec_path, "simulation spec (JSON)")->required();
    sim->add_option("--out", out_dir, "output directory")->required();
    sim->add_option("--seed", seed, "run seed (recorded in the manifest)");

    // correct
    auto* cor = app.add_subcommand("correct", "estimate fields and the corrected image");
    std::string in_dir;
    cor->add_option("in", in_dir, "directory with simulate outputs")->required();
    cor->add_option("--out", out_dir, "output directory")->required();
    cor->add_option("--config", config_path, "solver config (JSON)");
    cor->add_option("--seed", seed, "run seed");
    cor->add_option("--threads", threads, "worker threads for stack mode");
    bool stack_mode = false;
    cor->add_flag("--stack", stack_mode, "correct the spectral-bin stacks instead of the pair");

    // mavric
    auto* mav = app.add_subcommand("mavric", "dual-polarity RSOS baselines");
    mav->add_option("in", in_dir, "directory with simulate outputs")->required();
    mav->add_option("--out", out_dir, "output directory")->required();

    // evaluate
    auto* eva = app.add_subcommand("evaluate", "NRMSE/PSNR of a tensor against a reference");
    std::string test_path, ref_path, mask_path;
    eva->add_option("test", test_path, "image tensor under test")->required();
    eva->add_option("ref", ref_path, "reference image tensor")->required();
    eva->add_option("--mask", mask_path, "region mask tensor (nonzero = included)");
    eva->add_option("--out", out_dir, "optional output directory for metrics + manifest");

    // gradcheck
    auto* grd = app.add_subcommand("gradcheck", "finite-difference check of the gradients");
    int size = 8;
    grd->add_option("--seed", seed, "instance seed");
    grd->add_option("--size", size, "instance side length");
    bool corrupt = false;
    grd->add_flag("--corrupt-gradient", corrupt, "negative control: perturb one gradient entry")
        ->group("");  // hidden

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) {
            cmd_simulate(spec_path, out_dir, seed);
        } else if (cor->parsed()) {
            cmd_correct(in_dir, config_path, out_dir, stack_mode, threads, seed);
        } else if (mav->parsed()) {
            cmd_mavric(in_dir, out_dir);
        } else if (eva->parsed()) {
            std::cout << cmd_evaluate(test_path, ref_path, mask_path, out_dir);
        } else if (grd->parsed()) {
            return cmd_gradcheck(seed, size, corrupt, std::cout);
        }
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const SolverDivergence& e) {
        std::cerr << "convergence failure: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace dpmr::cli
