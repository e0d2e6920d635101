#pragma once

// The MR image generation operator in two discrete forms.
//
// distort_splat is the production operator: each source pixel x deposits its
// intensity at x' = x + s(x) along the readout axis (columns) with linear
// weights, s(x) = polarity * dv(x) / readout_bandwidth. Accumulation realizes
// pile-up, gaps realize signal voids, and the Jacobian intensity modulation
// emerges from deposit density. Deposits outside [0, cols-1] are dropped --
// the only source of non-conservation. The operator handles fold-over
// natively, where the analytic 1/|1 + ds/dx| form is singular.
//
// distort_encoding is the slow O(N^2 per row) encoding-sum oracle: an exact
// discrete transcription of the continuous generation operator with periodic
// boundary. Its boundary convention differs from the splat (wrap vs drop), so
// equivalence checks restrict field support to the interior.
//
// distort_splat_vjp supplies exact reverse-mode gradients of the splat with
// respect to both the image and the field. The splat is piecewise linear in
// s, so d(output)/d(s) is piecewise constant with kinks at integer target
// positions; callers that difference numerically must stay off the kinks.
//
// Rows are independent; within a row accumulation runs left to right, so the
// result does not depend on any parallel schedule.

#include <cmath>
#include <complex>
#include <numbers>

#include "dpmr/types.hpp"

namespace dpmr {

inline Grid<double> shift_map(const FieldMap& dv, const AcquisitionParams& params) {
    params.validate();
    check_shape(dv.data, params, "shift_map field");
    Grid<double> s(dv.rows(), dv.cols());
    const double pol = static_cast<double>(params.polarity);
    for (std::size_t i = 0; i < s.size(); ++i)
        s[i] = pol * dv.data[i] / params.readout_bandwidth;
    return s;
}

inline Image distort_splat(const Image& img, const FieldMap& dv, const AcquisitionParams& params) {
    params.validate();
    check_shape(img.data, params, "distort_splat image");
    check_same_shape(img.data, dv.data, "distort_splat image vs field");
    require(grid_all_finite(dv.data), "distort_splat: non-finite field");

    const int rows = img.rows(), cols = img.cols();
    const double pol = static_cast<double>(params.polarity);
    const double rbw = params.readout_bandwidth;

    Image out{Grid<double>(rows, cols, 0.0)};
    for (int r = 0; r < rows; ++r) {
        const double* src = img.data.row_ptr(r);
        const double* field = dv.data.row_ptr(r);
        double* dst = out.data.row_ptr(r);
        for (int x = 0; x < cols; ++x) {
            const double s = pol * field[x] / rbw;
            const double xp = static_cast<double>(x) + s;
            const double fl = std::floor(xp);
            const long i0 = static_cast<long>(fl);
            const double frac = xp - fl;
            const double v = src[x];
            if (i0 >= 0 && i0 < cols)
                dst[i0] += v * (1.0 - frac);
            if (i0 + 1 >= 0 && i0 + 1 < cols)
                dst[i0 + 1] += v * frac;
        }
    }
    return out;
}

// Exact discrete encoding sum with periodic boundary:
//   I_hat(xh) = Re{ (1/N) sum_k [ sum_x I(x) e^{-j2pik(x+s(x))/N} ] e^{+j2pik xh/N} }
// The continuous k-space integral is symmetric about zero, so k runs over
// -N/2..N/2 with the Nyquist term split in half (plain 0..N-1 indexing is not
// equivalent here: the displaced exponents are evaluated at non-integer
// positions, where high k do not alias onto negative frequencies, and the
// real part of the one-sided sum degenerates into an oscillating kernel).
// With the symmetric range each displaced source pixel is laid down under a
// periodic-sinc interpolation kernel.
inline Image distort_encoding(const Image& img, const FieldMap& dv,
                              const AcquisitionParams& params) {
    params.validate();
    check_shape(img.data, params, "distort_encoding image");
    check_same_shape(img.data, dv.data, "distort_encoding image vs field");
    require(img.cols() >= 2, "distort_encoding: need at least 2 columns");
    require(grid_all_finite(dv.data), "distort_encoding: non-finite field");

    const int rows = img.rows(), cols = img.cols();
    const double n = static_cast<double>(cols);
    const double pol = static_cast<double>(params.polarity);
    const double rbw = params.readout_bandwidth;
    const double two_pi = 2.0 * std::numbers::pi;

    const int k_lo = -(cols / 2);
    const int k_hi = cols % 2 == 0 ? cols / 2 : (cols - 1) / 2;

    Image out{Grid<double>(rows, cols, 0.0)};
    std::vector<std::complex<double>> kspace(static_cast<std::size_t>(k_hi - k_lo + 1));
    for (int r = 0; r < rows; ++r) {
        const double* src = img.data.row_ptr(r);
        const double* field = dv.data.row_ptr(r);
        double* dst = out.data.row_ptr(r);

        for (int k = k_lo; k <= k_hi; ++k) {
            std::complex<double> acc(0.0, 0.0);
            for (int x = 0; x < cols; ++x) {
                const double s = pol * field[x] / rbw;
                const double phase = -two_pi * k * (static_cast<double>(x) + s) / n;
                acc += src[x] * std::complex<double>(std::cos(phase), std::sin(phase));
            }
            const double w = (cols % 2 == 0 && std::abs(k) * 2 == cols) ? 0.5 : 1.0;
            kspace[static_cast<std::size_t>(k - k_lo)] = w * acc;
        }
        for (int xh = 0; xh < cols; ++xh) {
            std::complex<double> acc(0.0, 0.0);
            for (int k = k_lo; k <= k_hi; ++k) {
                const double phase = two_pi * k * static_cast<double>(xh) / n;
                acc += kspace[static_cast<std::size_t>(k - k_lo)] *
                       std::complex<double>(std::cos(phase), std::sin(phase));
            }
            dst[xh] = acc.real() / n;
        }
    }
    return out;
}

struct SplatVjp {
    Grid<double> grad_image;  // d(loss)/d(input image)
    Grid<double> grad_field;  // d(loss)/d(field), Hz^-1 chain factor included
};

inline SplatVjp distort_splat_vjp(const Image& img, const FieldMap& dv,
                                  const AcquisitionParams& params,
                                  const Grid<double>& upstream) {
    params.validate();
    check_shape(img.data, params, "distort_splat_vjp image");
    check_same_shape(img.data, dv.data, "distort_splat_vjp image vs field");
    check_same_shape(img.data, upstream, "distort_splat_vjp upstream");
    require(grid_all_finite(dv.data), "distort_splat_vjp: non-finite field");

    const int rows = img.rows(), cols = img.cols();
    const double pol = static_cast<double>(params.polarity);
    const double rbw = params.readout_bandwidth;

    SplatVjp g{Grid<double>(rows, cols, 0.0), Grid<double>(rows, cols, 0.0)};
    for (int r = 0; r < rows; ++r) {
        const double* src = img.data.row_ptr(r);
        const double* field = dv.data.row_ptr(r);
        const double* up = upstream.row_ptr(r);
        double* gi = g.grad_image.row_ptr(r);
        double* gf = g.grad_field.row_ptr(r);
        for (int x = 0; x < cols; ++x) {
            const double s = pol * field[x] / rbw;
            const double xp = static_cast<double>(x) + s;
            const double fl = std::floor(xp);
            const long i0 = static_cast<long>(fl);
            const double frac = xp - fl;
            const double u0 = (i0 >= 0 && i0 < cols) ? up[i0] : 0.0;
            const double u1 = (i0 + 1 >= 0 && i0 + 1 < cols) ? up[i0 + 1] : 0.0;
            gi[x] = (1.0 - frac) * u0 + frac * u1;
            // d(out)/d(s) at pixel x is src[x] * (u1 - u0); chain ds/ddv = pol/rbw
            gf[x] = src[x] * (u1 - u0) * pol / rbw;
        }
    }
    return g;
}

}  // namespace dpmr
