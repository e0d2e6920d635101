#pragma once

// Finite-difference validation of the analytic objective gradients on a
// seeded random instance. Fields are drawn so every splat lands well away
// from the integer-shift kinks (the splat derivative is piecewise constant
// in the shift) and so no TV difference sits near a sign tie; the central
// differences are then exact up to roundoff and must agree with the
// reverse-mode gradients tightly.

#include <cstdint>
#include <cstdio>
#include <string>

#include "dpmr/rng.hpp"
#include "dpmr/solver.hpp"

namespace dpmr {

struct GradCheckReport {
    double err_dw_pos = 0.0;
    double err_dw_neg = 0.0;
    double err_dv = 0.0;
    double err_latent = 0.0;
    double threshold = 1e-3;

    bool pass() const {
        return err_dw_pos < threshold && err_dw_neg < threshold && err_dv < threshold &&
               err_latent < threshold;
    }

    std::string to_string() const {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "dw_pos=%.6e\ndw_neg=%.6e\ndv=%.6e\nlatent=%.6e\nthreshold=%.1e\nresult=%s",
                      err_dw_pos, err_dw_neg, err_dv, err_latent, threshold,
                      pass() ? "pass" : "fail");
        return buf;
    }
};

namespace detail {

// smooth strictly positive image: offset plus a few wide bumps
inline Image gradcheck_image(Rng& rng, int size) {
    Image img{Grid<double>(size, size, 0.3)};
    for (int k = 0; k < 3; ++k) {
        const double cr = rng.uniform(1.0, size - 2.0);
        const double cc = rng.uniform(1.0, size - 2.0);
        const double amp = rng.uniform(0.3, 1.0);
        const double sigma = rng.uniform(1.5, 3.0);
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c) {
                const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
                img.data(r, c) += amp * std::exp(-d2 / (2.0 * sigma * sigma));
            }
    }
    return img;
}

// per-pixel shifts with frac(s) and frac(s/2) at least `margin` from 0 and 1
inline Grid<double> off_kink_field(Rng& rng, int size, double rbw, double margin) {
    Grid<double> f(size, size);
    for (auto& x : f.values()) {
        for (;;) {
            const double u = rng.uniform(-0.45, 0.45);  // shift in pixels
            const auto away = [margin](double s) {
                const double fr = s - std::floor(s);
                return fr > margin && fr < 1.0 - margin;
            };
            if (away(u) && away(u / 2.0)) {
                x = u * rbw;
                break;
            }
        }
    }
    return f;
}

inline double min_neighbor_gap(const Grid<double>& f) {
    double gap = std::numeric_limits<double>::infinity();
    for (int r = 0; r < f.rows(); ++r)
        for (int c = 0; c + 1 < f.cols(); ++c)
            gap = std::min(gap, std::abs(f(r, c + 1) - f(r, c)));
    for (int r = 0; r + 1 < f.rows(); ++r)
        for (int c = 0; c < f.cols(); ++c)
            gap = std::min(gap, std::abs(f(r + 1, c) - f(r, c)));
    return gap;
}

}  // namespace detail

struct GradCheckInstance {
    Image I_pos;
    Image I_neg;
    SolverState state;
    AcquisitionParams params;
    SolverConfig cfg;
};

inline GradCheckInstance make_gradcheck_instance(std::uint64_t seed, int size) {
    require(size >= 4, "gradcheck size must be >= 4");
    Rng rng(seed);
    const double rbw = 780.0;

    GradCheckInstance ins;
    ins.params = AcquisitionParams{rbw, +1, size, size};
    ins.cfg = SolverConfig::defaults_for(ins.params);
    ins.I_pos = detail::gradcheck_image(rng, size);
    ins.I_neg = detail::gradcheck_image(rng, size);

    ins.state = SolverState::zeros(size, size);
    const double kink_margin = 0.1;
    const double tie_gap = 1e-2;  // Hz; keeps TV signs stable under the FD step
    auto draw = [&](Grid<double>& dst) {
        do {
            dst = detail::off_kink_field(rng, size, rbw, kink_margin);
        } while (detail::min_neighbor_gap(dst) < tie_gap);
    };
    draw(ins.state.dw_pos.data);
    draw(ins.state.dw_neg.data);
    draw(ins.state.dv.data);
    for (auto& a : ins.state.attention.latent.values())
        a = rng.uniform(-1.0, 1.0);
    return ins;
}

inline GradCheckReport run_gradcheck(std::uint64_t seed, int size, bool corrupt = false) {
    GradCheckInstance ins = make_gradcheck_instance(seed, size);

    FieldGradients analytic =
        total_loss_grad(ins.state, ins.I_pos, ins.I_neg, ins.params, ins.cfg);
    if (corrupt)
        analytic.dv(0, 0) += 0.5 * (grid_max_abs(analytic.dv) + 1e-9);

    const auto loss_at = [&](const SolverState& s) {
        return total_loss(s, ins.I_pos, ins.I_neg, ins.params, ins.cfg).total;
    };

    const auto field_error = [&](Grid<double>& target, const Grid<double>& grad, double h) {
        double max_abs_diff = 0.0;
        const double scale = grid_max_abs(grad) + 1e-12;
        for (std::size_t i = 0; i < target.size(); ++i) {
            const double saved = target[i];
            target[i] = saved + h;
            const double lp = loss_at(ins.state);
            target[i] = saved - h;
            const double lm = loss_at(ins.state);
            target[i] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            max_abs_diff = std::max(max_abs_diff, std::abs(fd - grad[i]));
        }
        return max_abs_diff / scale;
    };

    const double h_field = 1e-3;   // Hz
    const double h_latent = 1e-4;  // unitless
    GradCheckReport rep;
    rep.err_dw_pos = field_error(ins.state.dw_pos.data, analytic.dw_pos, h_field);
    rep.err_dw_neg = field_error(ins.state.dw_neg.data, analytic.dw_neg, h_field);
    rep.err_dv = field_error(ins.state.dv.data, analytic.dv, h_field);
    rep.err_latent = field_error(ins.state.attention.latent, analytic.latent, h_latent);
    return rep;
}

}  // namespace dpmr
