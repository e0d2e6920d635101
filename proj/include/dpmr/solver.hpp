#pragma once

// Direct minimization of the dual-polarity correction objective over the two
// frequency-shift maps, the off-resonance map and the attention latent.
//
// Objective, for a measured pair (I+, I-):
//   base  mean((F(I+, w+) - I-)^2) + mean((F(I-, w-) - I+)^2)
//   dc    mean((F(I0_hat, v) - I+)^2) + mean((F_neg(I0_hat, v) - I-)^2)
//         with I0_hat = rho .* F(I+, w+/2) + (1 - rho) .* F(I-, w-/2)
//   tv    anisotropic total variation of v, w+ and w-, one-sided at edges,
//         normalized by pixel count
//   total = lambda_base * base + lambda_dc * dc + lambda_tv * tv
//
// F is distort_splat with positive polarity, F_neg with negative. w+ lives on
// the positive-polarity pixel grid, w- on the negative one; each warps the
// image it is co-registered with. All MSE terms are pixel means so the lambda
// defaults transfer across image sizes. Gradients are exact reverse-mode
// compositions of the splat VJP, the sigmoid blend and TV subgradients
// (sign of differences, zero at ties).
//
// Optimization is Adam (beta1 0.9, beta2 0.999, eps 1e-8) from zero-valued
// fields, so the first iterate blends with rho = 0.5, i.e. plain averaging
// of the two half-corrected images. The learning rate is in Hz per step for
// the fields and unitless for the latent.

#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dpmr/forward_model.hpp"
#include "dpmr/types.hpp"

namespace dpmr {

struct SolverConfig {
    double lambda_base = 1.0;
    double lambda_dc = 1.0;
    double lambda_tv = 1e-4;
    double learning_rate = 1e-4 * 780.0;  // Hz per step, 1e-4 of a pixel at the default bandwidth
    double latent_learning_rate = 1e-2;
    int max_iters = 2000;
    double rel_tol = 1e-7;  // relative loss change over 10 iterations
    std::uint64_t seed = 0;

    static SolverConfig defaults_for(const AcquisitionParams& params) {
        SolverConfig cfg;
        cfg.learning_rate = 1e-4 * params.readout_bandwidth;
        return cfg;
    }

    void validate() const {
        require(lambda_base >= 0.0 && lambda_dc >= 0.0 && lambda_tv >= 0.0,
                "loss weights must be >= 0");
        require(learning_rate > 0.0 && latent_learning_rate >= 0.0, "learning rates must be > 0");
        require(max_iters >= 1, "max_iters must be >= 1");
    }
};

struct LossBreakdown {
    double base = 0.0;
    double dc = 0.0;
    double tv = 0.0;
    double total = 0.0;

    std::string to_string() const {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "total=%.9g base=%.9g dc=%.9g tv=%.9g", total, base, dc,
                      tv);
        return buf;
    }
};

struct SolverState {
    FieldMap dw_pos;       // on the positive-polarity grid
    FieldMap dw_neg;       // on the negative-polarity grid
    FieldMap dv;           // on the undistorted grid
    AttentionMap attention;
    Grid<double> m_dw_pos, v_dw_pos;
    Grid<double> m_dw_neg, v_dw_neg;
    Grid<double> m_dv, v_dv;
    Grid<double> m_latent, v_latent;
    int iteration = 0;

    static SolverState zeros(int rows, int cols) {
        SolverState s;
        s.dw_pos = FieldMap{Grid<double>(rows, cols, 0.0), FieldDomain::distorted_pos};
        s.dw_neg = FieldMap{Grid<double>(rows, cols, 0.0), FieldDomain::distorted_neg};
        s.dv = FieldMap{Grid<double>(rows, cols, 0.0), FieldDomain::undistorted};
        s.attention = AttentionMap{Grid<double>(rows, cols, 0.0)};
        s.m_dw_pos = s.v_dw_pos = Grid<double>(rows, cols, 0.0);
        s.m_dw_neg = s.v_dw_neg = Grid<double>(rows, cols, 0.0);
        s.m_dv = s.v_dv = Grid<double>(rows, cols, 0.0);
        s.m_latent = s.v_latent = Grid<double>(rows, cols, 0.0);
        return s;
    }
};

struct FieldGradients {
    Grid<double> dw_pos;
    Grid<double> dw_neg;
    Grid<double> dv;
    Grid<double> latent;
};

struct TraceRow {
    int iter = 0;
    double total = 0.0;
    double base = 0.0;
    double dc = 0.0;
    double tv = 0.0;
};

struct SolverDivergence : std::runtime_error {
    int iteration;
    LossBreakdown breakdown;
    SolverDivergence(int iter, const LossBreakdown& b)
        : std::runtime_error("solver diverged at iteration " + std::to_string(iter) + ": " +
                             b.to_string()),
          iteration(iter),
          breakdown(b) {}
};

namespace detail {

inline double mse(const Grid<double>& a, const Grid<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

inline FieldMap half(const FieldMap& f) {
    FieldMap h = f;
    for (auto& x : h.data.values())
        x *= 0.5;
    return h;
}

inline FieldMap negate(const FieldMap& f) {
    FieldMap n = f;
    for (auto& x : n.data.values())
        x = -x;
    return n;
}

}  // namespace detail

inline double base_loss(const Image& I_pos, const Image& I_neg, const FieldMap& dw_pos,
                        const FieldMap& dw_neg, const AcquisitionParams& params) {
    check_same_shape(I_pos.data, I_neg.data, "base_loss images");
    check_same_shape(I_pos.data, dw_pos.data, "base_loss dw_pos");
    check_same_shape(I_neg.data, dw_neg.data, "base_loss dw_neg");
    check_domain(dw_pos, FieldDomain::distorted_pos, "base_loss dw_pos");
    check_domain(dw_neg, FieldDomain::distorted_neg, "base_loss dw_neg");

    const AcquisitionParams fwd = params.with_polarity(+1);
    const Image est_neg = distort_splat(I_pos, dw_pos, fwd);  // warp of I+ toward I-
    const Image est_pos = distort_splat(I_neg, dw_neg, fwd);  // warp of I- toward I+
    return detail::mse(est_neg.data, I_neg.data) + detail::mse(est_pos.data, I_pos.data);
}

// Half-map corrections blended by a per-pixel weight in [0,1].
inline Image correct_pair(const Image& I_pos, const Image& I_neg, const FieldMap& dw_pos,
                          const FieldMap& dw_neg, const Grid<double>& rho,
                          const AcquisitionParams& params) {
    check_same_shape(I_pos.data, I_neg.data, "correct_pair images");
    check_same_shape(I_pos.data, dw_pos.data, "correct_pair dw_pos");
    check_same_shape(I_neg.data, dw_neg.data, "correct_pair dw_neg");
    check_same_shape(I_pos.data, rho, "correct_pair rho");
    check_domain(dw_pos, FieldDomain::distorted_pos, "correct_pair dw_pos");
    check_domain(dw_neg, FieldDomain::distorted_neg, "correct_pair dw_neg");
    for (double w : rho.values())
        require(w >= 0.0 && w <= 1.0, "correct_pair: rho must lie in [0,1]");

    const AcquisitionParams fwd = params.with_polarity(+1);
    const Image to0_pos = distort_splat(I_pos, detail::half(dw_pos), fwd);
    const Image to0_neg = distort_splat(I_neg, detail::half(dw_neg), fwd);

    Image out{Grid<double>(I_pos.rows(), I_pos.cols())};
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = rho[i] * to0_pos.data[i] + (1.0 - rho[i]) * to0_neg.data[i];
    return out;
}

inline double dc_loss(const Image& I0_hat, const FieldMap& dv, const Image& I_pos,
                      const Image& I_neg, const AcquisitionParams& params) {
    check_same_shape(I0_hat.data, dv.data, "dc_loss field");
    check_same_shape(I0_hat.data, I_pos.data, "dc_loss I_pos");
    check_same_shape(I0_hat.data, I_neg.data, "dc_loss I_neg");
    check_domain(dv, FieldDomain::undistorted, "dc_loss dv");

    const Image to_pos = distort_splat(I0_hat, dv, params.with_polarity(+1));
    const Image to_neg = distort_splat(I0_hat, dv, params.with_polarity(-1));
    return detail::mse(to_pos.data, I_pos.data) + detail::mse(to_neg.data, I_neg.data);
}

// Anisotropic total variation, one-sided differences, mean per pixel.
inline double tv(const FieldMap& field) {
    require(grid_all_finite(field.data), "tv: non-finite field");
    const int rows = field.rows(), cols = field.cols();
    double acc = 0.0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c + 1 < cols; ++c)
            acc += std::abs(field.data(r, c + 1) - field.data(r, c));
    for (int r = 0; r + 1 < rows; ++r)
        for (int c = 0; c < cols; ++c)
            acc += std::abs(field.data(r + 1, c) - field.data(r, c));
    return acc / static_cast<double>(field.data.size());
}

namespace detail {

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// out += scale * d(tv)/d(field)
inline void add_tv_subgradient(const Grid<double>& field, double scale, Grid<double>& out) {
    const int rows = field.rows(), cols = field.cols();
    const double w = scale / static_cast<double>(field.size());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c + 1 < cols; ++c) {
            const double s = sgn(field(r, c + 1) - field(r, c));
            out(r, c + 1) += w * s;
            out(r, c) -= w * s;
        }
    for (int r = 0; r + 1 < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double s = sgn(field(r + 1, c) - field(r, c));
            out(r + 1, c) += w * s;
            out(r, c) -= w * s;
        }
}

struct Evaluation {
    LossBreakdown losses;
    Image i0_hat;
    FieldGradients grads;  // filled only when with_grads
};

// One forward pass through every loss term, optionally followed by the exact
// reverse pass. Keeping both in one place guarantees the reported breakdown
// and the gradients describe the same computation.
inline Evaluation evaluate_objective(const SolverState& state, const Image& I_pos,
                                     const Image& I_neg, const AcquisitionParams& params,
                                     const SolverConfig& cfg, bool with_grads) {
    check_same_shape(I_pos.data, I_neg.data, "objective images");
    check_shape(I_pos.data, params, "objective image");
    check_same_shape(I_pos.data, state.dw_pos.data, "objective dw_pos");
    check_same_shape(I_pos.data, state.dw_neg.data, "objective dw_neg");
    check_same_shape(I_pos.data, state.dv.data, "objective dv");
    check_same_shape(I_pos.data, state.attention.latent, "objective latent");

    const int rows = I_pos.rows(), cols = I_pos.cols();
    const double npix = static_cast<double>(I_pos.data.size());
    const AcquisitionParams fwd = params.with_polarity(+1);
    const AcquisitionParams bwd = params.with_polarity(-1);

    // forward
    const Image est_neg = distort_splat(I_pos, state.dw_pos, fwd);
    const Image est_pos = distort_splat(I_neg, state.dw_neg, fwd);
    const double base = mse(est_neg.data, I_neg.data) + mse(est_pos.data, I_pos.data);

    const FieldMap half_pos = half(state.dw_pos);
    const FieldMap half_neg = half(state.dw_neg);
    const Image to0_pos = distort_splat(I_pos, half_pos, fwd);
    const Image to0_neg = distort_splat(I_neg, half_neg, fwd);
    const Grid<double> rho = state.attention.rho();

    Image i0_hat{Grid<double>(rows, cols)};
    for (std::size_t i = 0; i < i0_hat.data.size(); ++i)
        i0_hat.data[i] = rho[i] * to0_pos.data[i] + (1.0 - rho[i]) * to0_neg.data[i];

    const Image dc_pos = distort_splat(i0_hat, state.dv, fwd);
    const Image dc_neg = distort_splat(i0_hat, state.dv, bwd);
    const double dc = mse(dc_pos.data, I_pos.data) + mse(dc_neg.data, I_neg.data);

    const double tv_total = tv(state.dw_pos) + tv(state.dw_neg) + tv(state.dv);

    Evaluation ev{LossBreakdown{}, std::move(i0_hat), FieldGradients{}};
    ev.losses.base = base;
    ev.losses.dc = dc;
    ev.losses.tv = tv_total;
    ev.losses.total = cfg.lambda_base * base + cfg.lambda_dc * dc + cfg.lambda_tv * tv_total;
    if (!with_grads)
        return ev;

    // reverse
    FieldGradients g{Grid<double>(rows, cols, 0.0), Grid<double>(rows, cols, 0.0),
                     Grid<double>(rows, cols, 0.0), Grid<double>(rows, cols, 0.0)};

    Grid<double> up(rows, cols);

    // base terms
    for (std::size_t i = 0; i < up.size(); ++i)
        up[i] = cfg.lambda_base * 2.0 * (est_neg.data[i] - I_neg.data[i]) / npix;
    {
        const SplatVjp vjp = distort_splat_vjp(I_pos, state.dw_pos, fwd, up);
        for (std::size_t i = 0; i < up.size(); ++i)
            g.dw_pos[i] += vjp.grad_field[i];
    }
    for (std::size_t i = 0; i < up.size(); ++i)
        up[i] = cfg.lambda_base * 2.0 * (est_pos.data[i] - I_pos.data[i]) / npix;
    {
        const SplatVjp vjp = distort_splat_vjp(I_neg, state.dw_neg, fwd, up);
        for (std::size_t i = 0; i < up.size(); ++i)
            g.dw_neg[i] += vjp.grad_field[i];
    }

    // dc terms: gradients w.r.t. dv directly, and w.r.t. i0_hat pulled back
    Grid<double> up_i0(rows, cols, 0.0);
    for (std::size_t i = 0; i < up.size(); ++i)
        up[i] = cfg.lambda_dc * 2.0 * (dc_pos.data[i] - I_pos.data[i]) / npix;
    {
        const SplatVjp vjp = distort_splat_vjp(ev.i0_hat, state.dv, fwd, up);
        for (std::size_t i = 0; i < up.size(); ++i) {
            g.dv[i] += vjp.grad_field[i];
            up_i0[i] += vjp.grad_image[i];
        }
    }
    for (std::size_t i = 0; i < up.size(); ++i)
        up[i] = cfg.lambda_dc * 2.0 * (dc_neg.data[i] - I_neg.data[i]) / npix;
    {
        const SplatVjp vjp = distort_splat_vjp(ev.i0_hat, state.dv, bwd, up);
        for (std::size_t i = 0; i < up.size(); ++i) {
            g.dv[i] += vjp.grad_field[i];
            up_i0[i] += vjp.grad_image[i];
        }
    }

    // blend: dI0/drho = to0_pos - to0_neg, drho/da = rho (1 - rho)
    for (std::size_t i = 0; i < up_i0.size(); ++i)
        g.latent[i] = up_i0[i] * (to0_pos.data[i] - to0_neg.data[i]) * rho[i] * (1.0 - rho[i]);

    // half-map chain: d(w/2)/dw = 1/2, weighted by the blend
    for (std::size_t i = 0; i < up.size(); ++i)
        up[i] = up_i0[i] * rho[i];
    {
        const SplatVjp vjp = distort_splat_vjp(I_pos, half_pos, fwd, up);
        for (std::size_t i = 0; i < up.size(); ++i)
            g.dw_pos[i] += 0.5 * vjp.grad_field[i];
    }
    for (std::size_t i = 0; i < up.size(); ++i)
        up[i] = up_i0[i] * (1.0 - rho[i]);
    {
        const SplatVjp vjp = distort_splat_vjp(I_neg, half_neg, fwd, up);
        for (std::size_t i = 0; i < up.size(); ++i)
            g.dw_neg[i] += 0.5 * vjp.grad_field[i];
    }

    add_tv_subgradient(state.dw_pos.data, cfg.lambda_tv, g.dw_pos);
    add_tv_subgradient(state.dw_neg.data, cfg.lambda_tv, g.dw_neg);
    add_tv_subgradient(state.dv.data, cfg.lambda_tv, g.dv);

    ev.grads = std::move(g);
    return ev;
}

}  // namespace detail

inline LossBreakdown total_loss(const SolverState& state, const Image& I_pos, const Image& I_neg,
                                const AcquisitionParams& params, const SolverConfig& cfg) {
    return detail::evaluate_objective(state, I_pos, I_neg, params, cfg, false).losses;
}

inline FieldGradients total_loss_grad(const SolverState& state, const Image& I_pos,
                                      const Image& I_neg, const AcquisitionParams& params,
                                      const SolverConfig& cfg) {
    return std::move(detail::evaluate_objective(state, I_pos, I_neg, params, cfg, true).grads);
}

struct SolveResult {
    FieldMap dw_pos;
    FieldMap dw_neg;
    FieldMap dv;
    AttentionMap attention;
    Grid<double> rho;
    Image i0_hat;
    std::vector<TraceRow> trace;
    int iterations = 0;
};

using SolveObserver =
    std::function<void(int iter, const SolverState&, const Image& i0_hat, const LossBreakdown&)>;

namespace detail {

struct Adam {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void step(Grid<double>& x, const Grid<double>& grad, Grid<double>& m, Grid<double>& v,
              double lr, int t) const {
        const double c1 = 1.0 - std::pow(beta1, t);
        const double c2 = 1.0 - std::pow(beta2, t);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double gi = grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

}  // namespace detail

inline SolveResult solve(const Image& I_pos, const Image& I_neg, const AcquisitionParams& params,
                         const SolverConfig& cfg, const SolveObserver& observer = {}) {
    cfg.validate();
    check_same_shape(I_pos.data, I_neg.data, "solve images");
    check_shape(I_pos.data, params, "solve image");
    require(grid_all_finite(I_pos.data) && grid_all_finite(I_neg.data),
            "solve: images must be finite");
    require(grid_min(I_pos.data) >= 0.0 && grid_min(I_neg.data) >= 0.0,
            "solve: images must be non-negative");

    const int rows = I_pos.rows(), cols = I_pos.cols();
    SolverState state = SolverState::zeros(rows, cols);
    const detail::Adam adam;

    std::vector<TraceRow> trace;
    trace.reserve(static_cast<std::size_t>(cfg.max_iters));
    std::vector<double> recent;  // loss history for the relative-change stop
    recent.reserve(static_cast<std::size_t>(cfg.max_iters));

    Image last_i0{Grid<double>(rows, cols, 0.0)};
    int iters_run = 0;
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        detail::Evaluation ev =
            detail::evaluate_objective(state, I_pos, I_neg, params, cfg, true);
        if (!std::isfinite(ev.losses.total))
            throw SolverDivergence(iter, ev.losses);

        trace.push_back(TraceRow{iter, ev.losses.total, ev.losses.base, ev.losses.dc,
                                 ev.losses.tv});
        recent.push_back(ev.losses.total);
        last_i0 = std::move(ev.i0_hat);
        if (observer)
            observer(iter, state, last_i0, ev.losses);

        state.iteration = iter;
        adam.step(state.dw_pos.data, ev.grads.dw_pos, state.m_dw_pos, state.v_dw_pos,
                  cfg.learning_rate, iter);
        adam.step(state.dw_neg.data, ev.grads.dw_neg, state.m_dw_neg, state.v_dw_neg,
                  cfg.learning_rate, iter);
        adam.step(state.dv.data, ev.grads.dv, state.m_dv, state.v_dv, cfg.learning_rate, iter);
        adam.step(state.attention.latent, ev.grads.latent, state.m_latent, state.v_latent,
                  cfg.latent_learning_rate, iter);
        if (!grid_all_finite(state.dw_pos.data) || !grid_all_finite(state.dw_neg.data) ||
            !grid_all_finite(state.dv.data) || !grid_all_finite(state.attention.latent))
            throw SolverDivergence(iter, ev.losses);

        iters_run = iter;
        if (iter > 10) {
            const double prev = recent[static_cast<std::size_t>(iter - 11)];
            const double change = std::abs(recent.back() - prev);
            if (change < cfg.rel_tol * std::max(std::abs(prev), 1e-30))
                break;
        }
    }

    // final image from the converged state
    const detail::Evaluation fin =
        detail::evaluate_objective(state, I_pos, I_neg, params, cfg, false);

    SolveResult res;
    res.dw_pos = state.dw_pos;
    res.dw_neg = state.dw_neg;
    res.dv = state.dv;
    res.attention = state.attention;
    res.rho = state.attention.rho();
    res.i0_hat = fin.i0_hat;
    res.trace = std::move(trace);
    res.iterations = iters_run;
    return res;
}

}  // namespace dpmr
