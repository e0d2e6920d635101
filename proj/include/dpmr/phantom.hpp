#pragma once

// Synthetic data generation: a gridded phantom with a signal-void metal disk,
// a dipolar off-resonance field, Gaussian spectral-bin weighting and the
// dual-polarity distorted pair.
//
// The field model is the in-plane field of an infinite susceptibility
// cylinder, A * (R/r)^2 * cos(2(theta - theta0)) outside the core, clamped to
// its r = R value inside. It is smooth outside the core and produces the
// characteristic one-sided pile-up and ripple pattern near the disk. The
// clamp removes the 1/r^2 singularity; the disk interior carries no signal
// anyway.
//
// Bin weighting applies to the undistorted image; each bin is distorted
// separately afterwards (excitation precedes encoding).

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "dpmr/forward_model.hpp"
#include "dpmr/types.hpp"

namespace dpmr {

struct PhantomSpec {
    int height = 64;
    int width = 64;
    int grid_period = 8;
    int grid_line_width = 2;
    double background_intensity = 0.25;
    double line_intensity = 1.0;
    double metal_center_row = 32.0;
    double metal_center_col = 32.0;
    double metal_radius = 6.0;
};

inline Image make_grid_phantom(const PhantomSpec& spec) {
    require(spec.height >= 8 && spec.width >= 8, "phantom must be at least 8x8");
    require(spec.grid_line_width >= 1, "grid_line_width must be >= 1");
    require(spec.grid_period > spec.grid_line_width, "grid_period must exceed line width");
    require(spec.metal_radius >= 0.0, "metal_radius must be >= 0");

    Image img{Grid<double>(spec.height, spec.width)};
    const double r2 = spec.metal_radius * spec.metal_radius;
    bool any_signal = false;
    for (int r = 0; r < spec.height; ++r) {
        for (int c = 0; c < spec.width; ++c) {
            const bool on_line =
                (r % spec.grid_period) < spec.grid_line_width ||
                (c % spec.grid_period) < spec.grid_line_width;
            double v = on_line ? spec.line_intensity : spec.background_intensity;
            const double dr = r - spec.metal_center_row;
            const double dc = c - spec.metal_center_col;
            if (spec.metal_radius > 0.0 && dr * dr + dc * dc <= r2)
                v = 0.0;
            img.data(r, c) = v;
            if (v != 0.0)
                any_signal = true;
        }
    }
    require(any_signal, "metal disk covers the entire phantom");
    return img;
}

struct DipoleFieldSpec {
    double center_row = 32.0;
    double center_col = 32.0;
    double core_radius = 6.0;    // pixels
    double amplitude_hz = 2340.0;  // field value at r = R, theta = theta0
    double orientation_rad = 0.0;
    double max_amplitude_hz = 12000.0;
};

inline FieldMap dipole_field(const DipoleFieldSpec& spec, int rows, int cols) {
    require(spec.core_radius >= 1.0, "core_radius must be >= 1");
    require(std::abs(spec.amplitude_hz) <= spec.max_amplitude_hz,
            "dipole amplitude exceeds configured maximum");
    require(rows >= 1 && cols >= 1, "dipole_field: bad shape");

    FieldMap f{Grid<double>(rows, cols), FieldDomain::undistorted};
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const double dr = r - spec.center_row;
            const double dc = c - spec.center_col;
            const double dist = std::sqrt(dr * dr + dc * dc);
            const double theta = std::atan2(dr, dc);
            const double angular = std::cos(2.0 * (theta - spec.orientation_rad));
            double radial = 1.0;  // clamped constant inside the core
            if (dist >= spec.core_radius) {
                const double ratio = spec.core_radius / dist;
                radial = ratio * ratio;
            }
            f.data(r, c) = spec.amplitude_hz * radial * angular;
        }
    }
    return f;
}

struct SpectralBinSpec {
    std::vector<double> centers_hz;
    double fwhm_hz = 2250.0;

    // 24 bins spaced 1 kHz from -11.5 kHz to +11.5 kHz
    static SpectralBinSpec default_table() {
        SpectralBinSpec s;
        for (int i = 0; i < 24; ++i)
            s.centers_hz.push_back(-11500.0 + 1000.0 * i);
        s.fwhm_hz = 2250.0;
        return s;
    }

    void validate() const {
        require(!centers_hz.empty(), "bin table must have at least one center");
        for (std::size_t i = 1; i < centers_hz.size(); ++i)
            require(centers_hz[i] > centers_hz[i - 1], "bin centers must be strictly increasing");
        require(fwhm_hz > 0.0, "fwhm must be > 0");
    }
};

// Gaussian RF profile with unit peak and the given full width at half maximum.
inline double spectral_weight(double delta_hz, double center_hz, double fwhm_hz) {
    require(fwhm_hz > 0.0, "fwhm must be > 0");
    const double d = delta_hz - center_hz;
    static const double four_ln2 = 4.0 * std::numbers::ln2;
    return std::exp(-four_ln2 * d * d / (fwhm_hz * fwhm_hz));
}

struct SpectralBinStack {
    std::vector<Image> bins;
    SpectralBinSpec spec;

    void validate() const {
        spec.validate();
        require(!bins.empty(), "stack must have at least one bin");
        require(bins.size() == spec.centers_hz.size(), "bin count does not match center table");
        for (const Image& b : bins)
            require(b.data.same_shape(bins.front().data), "stack bins must share one shape");
    }
};

// Undistorted per-bin images: bin_b(x) = I0(x) * W(dv(x); center_b, fwhm).
inline SpectralBinStack make_bin_stack(const Image& I0, const FieldMap& dv,
                                       const SpectralBinSpec& bins) {
    bins.validate();
    check_same_shape(I0.data, dv.data, "make_bin_stack image vs field");

    SpectralBinStack stack;
    stack.spec = bins;
    stack.bins.reserve(bins.centers_hz.size());
    for (double center : bins.centers_hz) {
        Image b{Grid<double>(I0.rows(), I0.cols())};
        for (std::size_t i = 0; i < I0.data.size(); ++i)
            b.data[i] = I0.data[i] * spectral_weight(dv.data[i], center, bins.fwhm_hz);
        stack.bins.push_back(std::move(b));
    }
    return stack;
}

// (F_G(I0, dv), F_-G(I0, dv)) -- the dual-polarity distorted pair.
inline std::pair<Image, Image> make_dual_pair(const Image& I0, const FieldMap& dv,
                                              const AcquisitionParams& params) {
    check_domain(dv, FieldDomain::undistorted, "make_dual_pair");
    Image pos = distort_splat(I0, dv, params.with_polarity(+1));
    Image neg = distort_splat(I0, dv, params.with_polarity(-1));
    return {std::move(pos), std::move(neg)};
}

}  // namespace dpmr
