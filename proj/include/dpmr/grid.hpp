#pragma once

// Dense row-major 2-D grid, the storage type behind images, field maps and
// attention latents. Values are kept in double precision in memory; the file
// format (io.hpp) stores float32.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpmr {

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond)
        throw ValidationError(msg);
}

template <class T>
class Grid {
public:
    Grid() = default;

    Grid(int rows, int cols, T fill = T{})
        : rows_(rows), cols_(cols), v_(static_cast<std::size_t>(rows) * cols, fill) {
        require(rows >= 1 && cols >= 1, "grid dimensions must be >= 1");
    }

    static Grid from_rows(std::initializer_list<std::initializer_list<T>> rows) {
        Grid g(static_cast<int>(rows.size()), static_cast<int>(rows.begin()->size()));
        int r = 0;
        for (const auto& row : rows) {
            require(static_cast<int>(row.size()) == g.cols_, "ragged initializer");
            int c = 0;
            for (const T& x : row)
                g(r, c++) = x;
            ++r;
        }
        return g;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    T& operator()(int r, int c) { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
    const T& operator()(int r, int c) const { return v_[static_cast<std::size_t>(r) * cols_ + c]; }

    T& operator[](std::size_t i) { return v_[i]; }
    const T& operator[](std::size_t i) const { return v_[i]; }

    T* row_ptr(int r) { return v_.data() + static_cast<std::size_t>(r) * cols_; }
    const T* row_ptr(int r) const { return v_.data() + static_cast<std::size_t>(r) * cols_; }

    std::vector<T>& values() { return v_; }
    const std::vector<T>& values() const { return v_; }

    bool same_shape(const Grid& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool operator==(const Grid& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && v_ == o.v_;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<T> v_;
};

inline double grid_sum(const Grid<double>& g) {
    double s = 0.0;
    for (double x : g.values())
        s += x;
    return s;
}

inline double grid_min(const Grid<double>& g) {
    double m = g.values().front();
    for (double x : g.values())
        m = std::min(m, x);
    return m;
}

inline double grid_max(const Grid<double>& g) {
    double m = g.values().front();
    for (double x : g.values())
        m = std::max(m, x);
    return m;
}

inline double grid_max_abs(const Grid<double>& g) {
    double m = 0.0;
    for (double x : g.values())
        m = std::max(m, std::abs(x));
    return m;
}

inline bool grid_all_finite(const Grid<double>& g) {
    for (double x : g.values())
        if (!std::isfinite(x))
            return false;
    return true;
}

}  // namespace dpmr
