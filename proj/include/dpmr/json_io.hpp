#pragma once

// JSON (de)serialization for the simulation spec and solver config files.
// Parse errors are reported with a line number computed from the byte offset.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dpmr/phantom.hpp"
#include "dpmr/solver.hpp"

namespace dpmr {

struct SimulationSpec {
    PhantomSpec phantom;
    DipoleFieldSpec field;
    SpectralBinSpec bins = SpectralBinSpec::default_table();
    AcquisitionParams acquisition{780.0, +1, 0, 0};  // shape filled from phantom
};

namespace detail {

inline int line_of_offset(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n')
            ++line;
    return line;
}

inline nlohmann::json parse_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw IoError("cannot open: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string text = ss.str();
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path + ":" + std::to_string(line_of_offset(text, e.byte)) +
                              ": " + e.what());
    }
}

}  // namespace detail

inline void from_json(const nlohmann::json& j, PhantomSpec& s) {
    s.height = j.at("height").get<int>();
    s.width = j.at("width").get<int>();
    s.grid_period = j.value("grid_period", s.grid_period);
    s.grid_line_width = j.value("grid_line_width", s.grid_line_width);
    s.background_intensity = j.value("background_intensity", s.background_intensity);
    s.line_intensity = j.value("line_intensity", s.line_intensity);
    if (j.contains("metal_center")) {
        s.metal_center_row = j["metal_center"].at(0).get<double>();
        s.metal_center_col = j["metal_center"].at(1).get<double>();
    }
    s.metal_radius = j.value("metal_radius", s.metal_radius);
}

inline void to_json(nlohmann::json& j, const PhantomSpec& s) {
    j = nlohmann::json{{"height", s.height},
                       {"width", s.width},
                       {"grid_period", s.grid_period},
                       {"grid_line_width", s.grid_line_width},
                       {"background_intensity", s.background_intensity},
                       {"line_intensity", s.line_intensity},
                       {"metal_center", {s.metal_center_row, s.metal_center_col}},
                       {"metal_radius", s.metal_radius}};
}

inline void from_json(const nlohmann::json& j, DipoleFieldSpec& s) {
    if (j.contains("center")) {
        s.center_row = j["center"].at(0).get<double>();
        s.center_col = j["center"].at(1).get<double>();
    }
    s.core_radius = j.value("core_radius", s.core_radius);
    s.amplitude_hz = j.at("amplitude_hz").get<double>();
    s.orientation_rad = j.value("orientation_rad", s.orientation_rad);
    s.max_amplitude_hz = j.value("max_amplitude_hz", s.max_amplitude_hz);
}

inline void to_json(nlohmann::json& j, const DipoleFieldSpec& s) {
    j = nlohmann::json{{"center", {s.center_row, s.center_col}},
                       {"core_radius", s.core_radius},
                       {"amplitude_hz", s.amplitude_hz},
                       {"orientation_rad", s.orientation_rad},
                       {"max_amplitude_hz", s.max_amplitude_hz}};
}

inline void from_json(const nlohmann::json& j, SpectralBinSpec& s) {
    if (j.contains("centers_hz"))
        s.centers_hz = j["centers_hz"].get<std::vector<double>>();
    else
        s.centers_hz = SpectralBinSpec::default_table().centers_hz;
    s.fwhm_hz = j.value("fwhm_hz", 2250.0);
}

inline void to_json(nlohmann::json& j, const SpectralBinSpec& s) {
    j = nlohmann::json{{"centers_hz", s.centers_hz}, {"fwhm_hz", s.fwhm_hz}};
}

inline void from_json(const nlohmann::json& j, SolverConfig& c) {
    c.lambda_base = j.value("lambda_base", c.lambda_base);
    c.lambda_dc = j.value("lambda_dc", c.lambda_dc);
    c.lambda_tv = j.value("lambda_tv", c.lambda_tv);
    c.learning_rate = j.value("learning_rate_hz", c.learning_rate);
    c.latent_learning_rate = j.value("latent_learning_rate", c.latent_learning_rate);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.rel_tol = j.value("rel_tol", c.rel_tol);
    c.seed = j.value("seed", c.seed);
}

inline void to_json(nlohmann::json& j, const SolverConfig& c) {
    j = nlohmann::json{{"lambda_base", c.lambda_base},
                       {"lambda_dc", c.lambda_dc},
                       {"lambda_tv", c.lambda_tv},
                       {"learning_rate_hz", c.learning_rate},
                       {"latent_learning_rate", c.latent_learning_rate},
                       {"max_iters", c.max_iters},
                       {"rel_tol", c.rel_tol},
                       {"seed", c.seed}};
}

inline SimulationSpec load_simulation_spec(const std::string& path) {
    const nlohmann::json j = detail::parse_json_file(path);
    SimulationSpec spec;
    try {
        spec.phantom = j.at("phantom").get<PhantomSpec>();
        spec.field = j.at("field").get<DipoleFieldSpec>();
        if (j.contains("bins"))
            spec.bins = j["bins"].get<SpectralBinSpec>();
        if (j.contains("acquisition"))
            spec.acquisition.readout_bandwidth =
                j["acquisition"].value("readout_bandwidth_hz_per_pixel", 780.0);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
    spec.acquisition.polarity = +1;
    spec.acquisition.rows = spec.phantom.height;
    spec.acquisition.cols = spec.phantom.width;
    return spec;
}

inline SolverConfig load_solver_config(const std::string& path, const AcquisitionParams& params) {
    const nlohmann::json j = detail::parse_json_file(path);
    SolverConfig cfg = SolverConfig::defaults_for(params);
    try {
        from_json(j, cfg);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
    cfg.validate();
    return cfg;
}

}  // namespace dpmr
