#pragma once

// Shared fixtures for the test suites: scratch directories, a PGM reader and
// seeded smooth image/field constructions used by the operator-equivalence
// and solver tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dpmr/rng.hpp"
#include "dpmr/types.hpp"

namespace testsupport {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;

    explicit TempDir(const std::string& name) {
        path = fs::current_path() / ("scratch_" + name);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }

    std::string file(const std::string& name) const { return (path / name).string(); }
};

struct Pgm {
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::vector<std::uint8_t> bytes;
};

inline Pgm read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    Pgm p;
    std::string magic;
    f >> magic;
    if (magic != "P5")
        throw std::runtime_error("not a P5 file: " + path);
    f >> p.width >> p.height >> p.maxval;
    f.get();  // single whitespace after maxval
    p.bytes.resize(static_cast<std::size_t>(p.width) * p.height);
    f.read(reinterpret_cast<char*>(p.bytes.data()), static_cast<std::streamsize>(p.bytes.size()));
    if (!f)
        throw std::runtime_error("truncated PGM: " + path);
    return p;
}

// strictly positive smooth image: base offset plus wide Gaussian blobs
inline dpmr::Image smooth_image(dpmr::Rng& rng, int rows, int cols, int blobs = 3,
                                double sigma_lo = 8.0, double sigma_hi = 12.0,
                                double base = 0.3) {
    dpmr::Image img{dpmr::Grid<double>(rows, cols, base)};
    for (int k = 0; k < blobs; ++k) {
        const double cr = rng.uniform(0.25 * rows, 0.75 * rows);
        const double cc = rng.uniform(0.25 * cols, 0.75 * cols);
        const double amp = rng.uniform(0.4, 1.0);
        const double sigma = rng.uniform(sigma_lo, sigma_hi);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
                img.data(r, c) += amp * std::exp(-d2 / (2.0 * sigma * sigma));
            }
    }
    return img;
}

// C1 ramp from 0 at `lo` to 1 at `hi`
inline double smoothstep(double x, double lo, double hi) {
    if (x <= lo)
        return 0.0;
    if (x >= hi)
        return 1.0;
    const double t = (x - lo) / (hi - lo);
    return t * t * (3.0 - 2.0 * t);
}

// Dense overlapping wide blobs on a jittered grid, tapered to zero at the
// readout edges: smooth, strictly positive inside, with intensity gradients
// nearly everywhere. The solver recovery tests use this image class; its
// long-wavelength content keeps the splat's fractional-shift attenuation
// negligible, and the edge taper keeps warped mass inside the field of view.
inline dpmr::Image recovery_image(std::uint64_t seed, int rows, int cols) {
    dpmr::Rng rng(seed);
    dpmr::Image img{dpmr::Grid<double>(rows, cols, 0.05)};
    for (int gr = 8; gr < rows; gr += 16)
        for (int gc = 8; gc < cols; gc += 16) {
            const double cr = gr + rng.uniform(-4.0, 4.0);
            const double cc = gc + rng.uniform(-4.0, 4.0);
            const double amp = rng.uniform(0.5, 1.0);
            const double sigma = rng.uniform(8.0, 12.0);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) {
                    const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
                    img.data(r, c) += amp * std::exp(-d2 / (2.0 * sigma * sigma));
                }
        }
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            img.data(r, c) *= smoothstep(c, 0.0, 7.0) * smoothstep(cols - 1.0 - c, 0.0, 7.0);
    return img;
}

// box average along the readout axis, half-width w (window 2w+1), clamped at
// the row ends; used to compare splat deposit densities against smooth
// references without the single-pixel deposit ripple
inline dpmr::Image box_filter_readout(const dpmr::Image& img, int w) {
    dpmr::Image out{dpmr::Grid<double>(img.rows(), img.cols())};
    for (int r = 0; r < img.rows(); ++r)
        for (int c = 0; c < img.cols(); ++c) {
            double acc = 0.0;
            int cnt = 0;
            for (int k = -w; k <= w; ++k) {
                const int cc = c + k;
                if (cc < 0 || cc >= img.cols())
                    continue;
                acc += img.data(r, cc);
                ++cnt;
            }
            out.data(r, c) = acc / cnt;
        }
    return out;
}

// Smooth field in Hz whose support stays at least `margin` pixels away from
// every border (hard zero there, smooth-windowed inside) and whose largest
// shift magnitude equals max_shift_px.
inline dpmr::FieldMap smooth_interior_field(dpmr::Rng& rng, int rows, int cols,
                                            double max_shift_px, int margin, double rbw,
                                            double sigma_lo = 6.0, double sigma_hi = 10.0) {
    dpmr::Grid<double> f(rows, cols, 0.0);
    const int blobs = 3;
    for (int k = 0; k < blobs; ++k) {
        const double cr = rng.uniform(0.3 * rows, 0.7 * rows);
        const double cc = rng.uniform(0.3 * cols, 0.7 * cols);
        const double amp = rng.uniform(-1.0, 1.0);
        const double sigma = rng.uniform(sigma_lo, sigma_hi);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
                f(r, c) += amp * std::exp(-d2 / (2.0 * sigma * sigma));
            }
    }
    const double ramp = 4.0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double wr = smoothstep(r, margin, margin + ramp) *
                              smoothstep(rows - 1.0 - r, margin, margin + ramp);
            const double wc = smoothstep(c, margin, margin + ramp) *
                              smoothstep(cols - 1.0 - c, margin, margin + ramp);
            f(r, c) *= wr * wc;
        }
    const double peak = dpmr::grid_max_abs(f);
    if (peak > 0.0) {
        const double scale = max_shift_px / peak;
        for (auto& x : f.values())
            x *= scale * rbw;
    }
    return dpmr::FieldMap{std::move(f), dpmr::FieldDomain::undistorted};
}

}  // namespace testsupport
