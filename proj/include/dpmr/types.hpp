#pragma once

// Domain types shared across the pipeline.
//
// Image           magnitude image, non-negative; readout axis = columns.
// FieldMap        per-pixel off-resonance or frequency-shift values in Hz,
//                 tagged with the pixel grid it lives on (undistorted x,
//                 positive-polarity x', negative-polarity x'').
// AttentionMap    latent field a with rho = sigmoid(a) in (0,1).
// AcquisitionParams  readout bandwidth in Hz/pixel, gradient polarity and
//                 grid shape. The bandwidth folds gamma and G_x into the one
//                 ratio they enter with: shift in pixels = polarity * dv / rbw.

#include "dpmr/grid.hpp"

namespace dpmr {

struct Image {
    Grid<double> data;

    int rows() const { return data.rows(); }
    int cols() const { return data.cols(); }
};

enum class FieldDomain { undistorted, distorted_pos, distorted_neg };

inline const char* to_string(FieldDomain d) {
    switch (d) {
        case FieldDomain::undistorted: return "undistorted";
        case FieldDomain::distorted_pos: return "distorted_pos";
        case FieldDomain::distorted_neg: return "distorted_neg";
    }
    return "?";
}

struct FieldMap {
    Grid<double> data;
    FieldDomain domain = FieldDomain::undistorted;

    int rows() const { return data.rows(); }
    int cols() const { return data.cols(); }
};

inline FieldMap constant_field(int rows, int cols, double value_hz,
                               FieldDomain domain = FieldDomain::undistorted) {
    return FieldMap{Grid<double>(rows, cols, value_hz), domain};
}

inline double sigmoid(double a) {
    // split by sign so neither branch exponentiates a large positive value
    if (a >= 0.0)
        return 1.0 / (1.0 + std::exp(-a));
    const double e = std::exp(a);
    return e / (1.0 + e);
}

struct AttentionMap {
    Grid<double> latent;

    Grid<double> rho() const {
        Grid<double> out(latent.rows(), latent.cols());
        for (std::size_t i = 0; i < latent.size(); ++i)
            out[i] = sigmoid(latent[i]);
        return out;
    }
};

struct AcquisitionParams {
    double readout_bandwidth = 780.0;  // Hz per pixel
    int polarity = +1;
    int rows = 0;
    int cols = 0;

    AcquisitionParams with_polarity(int p) const {
        AcquisitionParams q = *this;
        q.polarity = p;
        return q;
    }

    void validate() const {
        require(readout_bandwidth > 0.0, "readout_bandwidth must be > 0");
        require(polarity == +1 || polarity == -1, "polarity must be +1 or -1");
        require(rows >= 1 && cols >= 1, "acquisition shape must be >= 1x1");
    }
};

inline void check_same_shape(const Grid<double>& a, const Grid<double>& b, const char* what) {
    require(a.same_shape(b), std::string("shape mismatch: ") + what);
}

inline void check_shape(const Grid<double>& g, const AcquisitionParams& p, const char* what) {
    require(g.rows() == p.rows && g.cols() == p.cols,
            std::string("shape does not match acquisition params: ") + what);
}

inline void check_domain(const FieldMap& f, FieldDomain expected, const char* what) {
    require(f.domain == expected,
            std::string(what) + ": field lives on " + to_string(f.domain) + ", expected " +
                to_string(expected));
}

}  // namespace dpmr
