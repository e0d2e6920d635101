#pragma once

// Seeded PRNG with hand-rolled distributions. std::mt19937_64 output is
// pinned by the standard; the uniform/normal mappings below avoid the
// library-dependent std::*_distribution implementations so that a seed
// reproduces the same stream everywhere.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "dpmr/grid.hpp"

namespace dpmr {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1) with 53 random mantissa bits
    double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    double normal(double mean = 0.0, double sd = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + sd * spare_;
        }
        double u1 = unit();
        double u2 = unit();
        while (u1 <= 0.0)
            u1 = unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return mean + sd * r * std::cos(t);
    }

    Grid<double> uniform_grid(int rows, int cols, double lo, double hi) {
        Grid<double> g(rows, cols);
        for (auto& x : g.values())
            x = uniform(lo, hi);
        return g;
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace dpmr
