#pragma once

// Batch front-end: simulate / correct / mavric / evaluate / gradcheck.
//
// Every run that writes files also writes a manifest.json recording the
// subcommand, the fully resolved parameters, the seed and FNV-1a hashes of
// all inputs and outputs. Runs are deterministic given the manifest; the
// thread count is execution width, not experiment identity, and is kept out
// of it.
//
// Exit codes: 0 success, 1 validation or convergence failure, 2 I/O failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "dpmr/gradcheck.hpp"
#include "dpmr/json_io.hpp"
#include "dpmr/metrics.hpp"
#include "dpmr/spectral.hpp"

namespace dpmr::cli {

namespace fs = std::filesystem;

struct Manifest {
    std::string subcommand;
    nlohmann::json parameters;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> inputs;   // path -> hash
    std::map<std::string, std::string> outputs;  // filename -> hash

    void write(const fs::path& dir) const {
        nlohmann::json j;
        j["subcommand"] = subcommand;
        j["parameters"] = parameters;
        j["seed"] = seed;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        std::ofstream f(dir / "manifest.json");
        if (!f)
            throw IoError("cannot write manifest in " + dir.string());
        f << j.dump(2) << "\n";
    }
};

namespace detail {

inline void write_grid_artifact(Manifest& man, const fs::path& dir, const std::string& name,
                                const Grid<double>& g, const std::string& units,
                                std::map<std::string, std::string> meta = {}) {
    const fs::path p = dir / name;
    write_tensor(p.string(), tensor_from_grid(g, units, std::move(meta)));
    man.outputs[name] = hash_file(p.string());
}

inline void write_stack_artifact(Manifest& man, const fs::path& dir, const std::string& name,
                                 const SpectralBinStack& stack,
                                 std::map<std::string, std::string> meta = {}) {
    const fs::path p = dir / name;
    write_tensor(p.string(), tensor_from_stack(stack, std::move(meta)));
    man.outputs[name] = hash_file(p.string());
}

inline void write_preview(Manifest& man, const fs::path& dir, const std::string& name,
                          const Image& img,
                          std::optional<std::pair<double, double>> range = std::nullopt) {
    const fs::path p = dir / name;
    export_image(img, p.string(), range);
    man.outputs[name] = hash_file(p.string());
}

inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline void write_trace(Manifest& man, const fs::path& dir, const std::string& name,
                        const std::vector<TraceRow>& trace) {
    const fs::path p = dir / name;
    std::ofstream f(p);
    if (!f)
        throw IoError("cannot write " + p.string());
    f << "iter,total,base,dc,tv\n";
    for (const TraceRow& row : trace)
        f << row.iter << "," << fmt(row.total) << "," << fmt(row.base) << "," << fmt(row.dc)
          << "," << fmt(row.tv) << "\n";
    man.outputs[name] = hash_file(p.string());
}

inline Grid<double> read_grid(const fs::path& p, Manifest& man) {
    man.inputs[p.string()] = hash_file(p.string());
    return grid_from_tensor(read_tensor(p.string()));
}

inline AcquisitionParams params_from_meta(const Tensor& t) {
    AcquisitionParams params;
    const auto it = t.meta.find("readout_bandwidth_hz_per_pixel");
    require(it != t.meta.end(), "input tensor missing readout_bandwidth_hz_per_pixel metadata");
    params.readout_bandwidth = std::stod(it->second);
    require(t.shape.size() == 2, "expected 2-d image tensor");
    params.rows = t.shape[0];
    params.cols = t.shape[1];
    params.polarity = +1;
    return params;
}

}  // namespace detail

inline void cmd_simulate(const std::string& spec_path, const std::string& out_dir,
                         std::uint64_t seed) {
    const SimulationSpec spec = load_simulation_spec(spec_path);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    Manifest man;
    man.subcommand = "simulate";
    man.seed = seed;
    man.inputs[spec_path] = hash_file(spec_path);
    nlohmann::json params_json;
    params_json["phantom"] = spec.phantom;
    params_json["field"] = spec.field;
    params_json["bins"] = spec.bins;
    params_json["acquisition"] = {
        {"readout_bandwidth_hz_per_pixel", spec.acquisition.readout_bandwidth}};
    man.parameters = params_json;

    const Image i0 = make_grid_phantom(spec.phantom);
    const FieldMap dv = dipole_field(spec.field, spec.phantom.height, spec.phantom.width);
    const auto [i_pos, i_neg] = make_dual_pair(i0, dv, spec.acquisition);

    const std::map<std::string, std::string> acq_meta = {
        {"readout_bandwidth_hz_per_pixel", detail::fmt(spec.acquisition.readout_bandwidth)}};

    detail::write_grid_artifact(man, dir, "i0.dpmr", i0.data, "signal", acq_meta);
    detail::write_grid_artifact(man, dir, "dv.dpmr", dv.data, "Hz", acq_meta);
    detail::write_grid_artifact(man, dir, "i_pos.dpmr", i_pos.data, "signal", acq_meta);
    detail::write_grid_artifact(man, dir, "i_neg.dpmr", i_neg.data, "signal", acq_meta);

    const SpectralBinStack stack0 = make_bin_stack(i0, dv, spec.bins);
    SpectralBinStack stack_pos, stack_neg;
    stack_pos.spec = stack_neg.spec = spec.bins;
    for (const Image& b : stack0.bins) {
        stack_pos.bins.push_back(distort_splat(b, dv, spec.acquisition.with_polarity(+1)));
        stack_neg.bins.push_back(distort_splat(b, dv, spec.acquisition.with_polarity(-1)));
    }
    detail::write_stack_artifact(man, dir, "stack_pos.dpmr", stack_pos, acq_meta);
    detail::write_stack_artifact(man, dir, "stack_neg.dpmr", stack_neg, acq_meta);
    detail::write_grid_artifact(man, dir, "rsos_ref.dpmr", rsos(stack0).data, "signal", acq_meta);

    detail::write_preview(man, dir, "i0.pgm", i0);
    detail::write_preview(man, dir, "i_pos.pgm", i_pos);
    detail::write_preview(man, dir, "i_neg.pgm", i_neg);
    detail::write_preview(man, dir, "dv.pgm", Image{dv.data});

    man.write(dir);
}

inline void cmd_correct(const std::string& in_dir, const std::string& config_path,
                        const std::string& out_dir, bool stack_mode, int threads,
                        std::uint64_t seed) {
    const fs::path in(in_dir);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    Manifest man;
    man.subcommand = stack_mode ? "correct-stack" : "correct";
    man.seed = seed;

    const Tensor probe = read_tensor((in / (stack_mode ? "stack_pos.dpmr" : "i_pos.dpmr")).string());
    AcquisitionParams params;
    if (stack_mode) {
        const auto it = probe.meta.find("readout_bandwidth_hz_per_pixel");
        require(it != probe.meta.end(), "stack tensor missing readout bandwidth metadata");
        params.readout_bandwidth = std::stod(it->second);
        require(probe.shape.size() == 3, "expected 3-d stack tensor");
        params.rows = probe.shape[1];
        params.cols = probe.shape[2];
    } else {
        params = detail::params_from_meta(probe);
    }

    SolverConfig cfg = SolverConfig::defaults_for(params);
    if (!config_path.empty()) {
        cfg = load_solver_config(config_path, params);
        man.inputs[config_path] = hash_file(config_path);
    }
    cfg.seed = seed;
    man.parameters = cfg;

    if (stack_mode) {
        man.inputs[(in / "stack_pos.dpmr").string()] = hash_file((in / "stack_pos.dpmr").string());
        man.inputs[(in / "stack_neg.dpmr").string()] = hash_file((in / "stack_neg.dpmr").string());
        const SpectralBinStack stack_pos = stack_from_tensor(probe);
        const SpectralBinStack stack_neg =
            stack_from_tensor(read_tensor((in / "stack_neg.dpmr").string()));

        const StackCorrectionResult res = correct_stack(stack_pos, stack_neg, params, cfg, threads);
        detail::write_grid_artifact(man, dir, "i0_stack_hat.dpmr", res.combined.data, "signal");
        detail::write_preview(man, dir, "i0_stack_hat.pgm", res.combined);

        const fs::path tp = dir / "trace_stack.csv";
        std::ofstream f(tp);
        if (!f)
            throw IoError("cannot write " + tp.string());
        f << "bin,iter,total,base,dc,tv\n";
        for (std::size_t b = 0; b < res.bin_traces.size(); ++b)
            for (const TraceRow& row : res.bin_traces[b])
                f << b << "," << row.iter << "," << detail::fmt(row.total) << ","
                  << detail::fmt(row.base) << "," << detail::fmt(row.dc) << ","
                  << detail::fmt(row.tv) << "\n";
        f.close();
        man.outputs["trace_stack.csv"] = hash_file(tp.string());

        if (fs::exists(in / "rsos_ref.dpmr")) {
            const Image ref{detail::read_grid(in / "rsos_ref.dpmr", man)};
            std::ofstream mf(dir / "metrics.txt");
            mf << "nrmse_vs_rsos_ref=" << detail::fmt(nrmse(res.combined, ref)) << "\n";
            mf.close();
            man.outputs["metrics.txt"] = hash_file((dir / "metrics.txt").string());
        }
    } else {
        const Image i_pos{detail::read_grid(in / "i_pos.dpmr", man)};
        const Image i_neg{detail::read_grid(in / "i_neg.dpmr", man)};

        const SolveResult res = solve(i_pos, i_neg, params, cfg);
        detail::write_grid_artifact(man, dir, "dw_pos.dpmr", res.dw_pos.data, "Hz",
                                    {{"domain", "distorted_pos"}});
        detail::write_grid_artifact(man, dir, "dw_neg.dpmr", res.dw_neg.data, "Hz",
                                    {{"domain", "distorted_neg"}});
        detail::write_grid_artifact(man, dir, "dv_hat.dpmr", res.dv.data, "Hz",
                                    {{"domain", "undistorted"}});
        detail::write_grid_artifact(man, dir, "rho.dpmr", res.rho, "weight");
        detail::write_grid_artifact(man, dir, "i0_hat.dpmr", res.i0_hat.data, "signal");
        detail::write_trace(man, dir, "trace.csv", res.trace);
        detail::write_preview(man, dir, "i0_hat.pgm", res.i0_hat);
        detail::write_preview(man, dir, "rho.pgm", Image{res.rho}, std::make_pair(0.0, 1.0));

        if (fs::exists(in / "i0.dpmr")) {
            const Image i0{detail::read_grid(in / "i0.dpmr", man)};
            std::ofstream mf(dir / "metrics.txt");
            mf << "nrmse_vs_i0=" << detail::fmt(nrmse(res.i0_hat, i0)) << "\n";
            mf << "nrmse_i_pos=" << detail::fmt(nrmse(i_pos, i0)) << "\n";
            mf << "nrmse_i_neg=" << detail::fmt(nrmse(i_neg, i0)) << "\n";
            mf.close();
            man.outputs["metrics.txt"] = hash_file((dir / "metrics.txt").string());
        }
    }

    man.write(dir);
}

inline void cmd_mavric(const std::string& in_dir, const std::string& out_dir) {
    const fs::path in(in_dir);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    Manifest man;
    man.subcommand = "mavric";

    const Tensor i0_t = read_tensor((in / "i0.dpmr").string());
    man.inputs[(in / "i0.dpmr").string()] = hash_file((in / "i0.dpmr").string());
    const AcquisitionParams params = detail::params_from_meta(i0_t);
    const Image i0{grid_from_tensor(i0_t)};
    const FieldMap dv{detail::read_grid(in / "dv.dpmr", man), FieldDomain::undistorted};

    SpectralBinSpec bins = SpectralBinSpec::default_table();
    if (fs::exists(in / "stack_pos.dpmr")) {
        const Tensor st = read_tensor((in / "stack_pos.dpmr").string());
        bins = stack_from_tensor(st).spec;
    }
    man.parameters = bins;

    const auto [mav_pos, mav_neg] = mavric_combine(i0, dv, bins, params);
    detail::write_grid_artifact(man, dir, "mavric_pos.dpmr", mav_pos.data, "signal");
    detail::write_grid_artifact(man, dir, "mavric_neg.dpmr", mav_neg.data, "signal");
    detail::write_preview(man, dir, "mavric_pos.pgm", mav_pos);
    detail::write_preview(man, dir, "mavric_neg.pgm", mav_neg);

    man.write(dir);
}

inline std::string cmd_evaluate(const std::string& test_path, const std::string& ref_path,
                                const std::string& mask_path, const std::string& out_dir) {
    Manifest man;
    man.subcommand = "evaluate";

    const Image test{detail::read_grid(test_path, man)};
    const Image ref{detail::read_grid(ref_path, man)};

    RegionMask mask;
    const RegionMask* mask_ptr = nullptr;
    if (!mask_path.empty()) {
        const Grid<double> mg = detail::read_grid(mask_path, man);
        mask.data = Grid<std::uint8_t>(mg.rows(), mg.cols());
        for (std::size_t i = 0; i < mg.size(); ++i)
            mask.data[i] = mg[i] != 0.0 ? 1 : 0;
        mask_ptr = &mask;
    }

    std::string text;
    text += "nrmse=" + detail::fmt(nrmse(test, ref, mask_ptr)) + "\n";
    const double p = psnr(test, ref);
    text += "psnr_db=" + (std::isinf(p) ? std::string("exact") : detail::fmt(p)) + "\n";

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        const fs::path dir(out_dir);
        std::ofstream f(dir / "metrics.txt");
        if (!f)
            throw IoError("cannot write metrics.txt in " + out_dir);
        f << text;
        f.close();
        man.outputs["metrics.txt"] = hash_file((dir / "metrics.txt").string());
        man.parameters = nlohmann::json::object();
        man.write(dir);
    }
    return text;
}

inline int cmd_gradcheck(std::uint64_t seed, int size, bool corrupt, std::ostream& out) {
    const GradCheckReport rep = run_gradcheck(seed, size, corrupt);
    out << rep.to_string() << "\n";
    return rep.pass() ? 0 : 1;
}

}  // namespace dpmr::cli
