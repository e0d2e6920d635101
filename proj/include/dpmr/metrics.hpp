#pragma once

// Evaluation against synthetic ground truth: masked NRMSE, PSNR and masked
// means. psnr returns +inf when the images are identical; callers printing
// metrics render that as "exact".

#include <cmath>
#include <limits>

#include "dpmr/types.hpp"

namespace dpmr {

struct RegionMask {
    Grid<std::uint8_t> data;

    int rows() const { return data.rows(); }
    int cols() const { return data.cols(); }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto v : data.values())
            n += v ? 1 : 0;
        return n;
    }

    RegionMask complement() const {
        RegionMask out{Grid<std::uint8_t>(data.rows(), data.cols())};
        for (std::size_t i = 0; i < data.size(); ++i)
            out.data[i] = data[i] ? 0 : 1;
        return out;
    }

    static RegionMask full(int rows, int cols) {
        return RegionMask{Grid<std::uint8_t>(rows, cols, 1)};
    }

    // everything at least `margin` pixels away from every border
    static RegionMask interior(int rows, int cols, int margin) {
        RegionMask m{Grid<std::uint8_t>(rows, cols, 0)};
        for (int r = margin; r < rows - margin; ++r)
            for (int c = margin; c < cols - margin; ++c)
                m.data(r, c) = 1;
        return m;
    }

    static RegionMask disk(int rows, int cols, double center_row, double center_col,
                           double radius) {
        RegionMask m{Grid<std::uint8_t>(rows, cols, 0)};
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                const double dr = r - center_row, dc = c - center_col;
                if (dr * dr + dc * dc <= radius * radius)
                    m.data(r, c) = 1;
            }
        return m;
    }

    RegionMask intersect(const RegionMask& o) const {
        RegionMask out{Grid<std::uint8_t>(data.rows(), data.cols())};
        for (std::size_t i = 0; i < data.size(); ++i)
            out.data[i] = (data[i] && o.data[i]) ? 1 : 0;
        return out;
    }
};

inline double nrmse(const Image& test, const Image& ref, const RegionMask* mask = nullptr) {
    check_same_shape(test.data, ref.data, "nrmse");
    if (mask) {
        require(mask->data.rows() == test.rows() && mask->data.cols() == test.cols(),
                "nrmse: mask shape mismatch");
        require(mask->count() > 0, "nrmse: empty mask");
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < test.data.size(); ++i) {
        if (mask && !mask->data[i])
            continue;
        const double d = test.data[i] - ref.data[i];
        num += d * d;
        den += ref.data[i] * ref.data[i];
    }
    require(den > 0.0, "nrmse: reference has zero norm over the mask");
    return std::sqrt(num) / std::sqrt(den);
}

inline double psnr(const Image& test, const Image& ref) {
    check_same_shape(test.data, ref.data, "psnr");
    const double peak = grid_max(ref.data);
    require(peak > 0.0, "psnr: reference peak must be > 0");
    double mse = 0.0;
    for (std::size_t i = 0; i < test.data.size(); ++i) {
        const double d = test.data[i] - ref.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(test.data.size());
    if (mse == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

inline double mean_in_mask(const Grid<double>& field, const RegionMask& mask) {
    require(mask.data.rows() == field.rows() && mask.data.cols() == field.cols(),
            "mean_in_mask: shape mismatch");
    const std::size_t n = mask.count();
    require(n > 0, "mean_in_mask: empty mask");
    double acc = 0.0;
    for (std::size_t i = 0; i < field.size(); ++i)
        if (mask.data[i])
            acc += field[i];
    return acc / static_cast<double>(n);
}

}  // namespace dpmr
