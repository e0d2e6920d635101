#pragma once

// Multi-spectral-bin combination: root-sum-of-squares, the dual-polarity
// MAVRIC baselines, and per-bin correction of a stack pair.
//
// rsos accumulates the squared bin values in ascending order at each pixel,
// which makes the combination independent of bin ordering down to the last
// bit; the mirror identity between the two MAVRIC outputs under field
// negation relies on this.

#include <algorithm>
#include <atomic>
#include <thread>
#include <utility>
#include <vector>

#include "dpmr/io.hpp"
#include "dpmr/phantom.hpp"
#include "dpmr/solver.hpp"

namespace dpmr {

inline Image rsos(const SpectralBinStack& stack) {
    stack.validate();
    const int rows = stack.bins.front().rows();
    const int cols = stack.bins.front().cols();
    const std::size_t nb = stack.bins.size();

    Image out{Grid<double>(rows, cols)};
    std::vector<double> sq(nb);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        for (std::size_t b = 0; b < nb; ++b) {
            const double v = stack.bins[b].data[i];
            sq[b] = v * v;
        }
        std::sort(sq.begin(), sq.end());
        double acc = 0.0;
        for (double q : sq)
            acc += q;
        out.data[i] = std::sqrt(acc);
    }
    return out;
}

// MAVRIC(+) and MAVRIC(-): every bin distorted with each polarity, then RSOS.
inline std::pair<Image, Image> mavric_combine(const Image& I0, const FieldMap& dv,
                                              const SpectralBinSpec& bins,
                                              const AcquisitionParams& params) {
    SpectralBinStack stack = make_bin_stack(I0, dv, bins);
    SpectralBinStack pos, neg;
    pos.spec = neg.spec = bins;
    pos.bins.reserve(stack.bins.size());
    neg.bins.reserve(stack.bins.size());
    for (const Image& b : stack.bins) {
        pos.bins.push_back(distort_splat(b, dv, params.with_polarity(+1)));
        neg.bins.push_back(distort_splat(b, dv, params.with_polarity(-1)));
    }
    return {rsos(pos), rsos(neg)};
}

struct StackCorrectionResult {
    Image combined;
    std::vector<std::vector<TraceRow>> bin_traces;
};

// Independent solve per bin pair, then RSOS of the corrected bins. Bins are
// independent, so they may run on several threads; each writes only its own
// slot and the combination is schedule-independent.
inline StackCorrectionResult correct_stack(const SpectralBinStack& stack_pos,
                                           const SpectralBinStack& stack_neg,
                                           const AcquisitionParams& params,
                                           const SolverConfig& cfg, int threads = 1) {
    stack_pos.validate();
    stack_neg.validate();
    require(stack_pos.bins.size() == stack_neg.bins.size(),
            "correct_stack: stacks must have the same bin count");
    require(threads >= 1, "correct_stack: threads must be >= 1");

    const std::size_t nb = stack_pos.bins.size();
    SpectralBinStack corrected;
    corrected.spec = stack_pos.spec;
    corrected.bins.resize(nb);
    std::vector<std::vector<TraceRow>> traces(nb);
    std::vector<std::string> errors(nb);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= nb)
                return;
            try {
                SolveResult r = solve(stack_pos.bins[b], stack_neg.bins[b], params, cfg);
                corrected.bins[b] = std::move(r.i0_hat);
                traces[b] = std::move(r.trace);
            } catch (const std::exception& e) {
                errors[b] = e.what();
            }
        }
    };

    if (threads == 1 || nb == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const int nthreads = std::min<int>(threads, static_cast<int>(nb));
        pool.reserve(static_cast<std::size_t>(nthreads));
        for (int i = 0; i < nthreads; ++i)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }

    for (std::size_t b = 0; b < nb; ++b)
        if (!errors[b].empty())
            throw ValidationError("correct_stack: bin " + std::to_string(b) + ": " + errors[b]);

    return StackCorrectionResult{rsos(corrected), std::move(traces)};
}

// Stack persistence as a single bins x rows x cols tensor with the bin table
// in the metadata.

inline Tensor tensor_from_stack(const SpectralBinStack& stack,
                                std::map<std::string, std::string> meta = {}) {
    stack.validate();
    const int rows = stack.bins.front().rows();
    const int cols = stack.bins.front().cols();

    std::string centers;
    for (std::size_t b = 0; b < stack.spec.centers_hz.size(); ++b) {
        if (b)
            centers += ",";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", stack.spec.centers_hz[b]);
        centers += buf;
    }
    meta["bin_centers_hz"] = centers;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", stack.spec.fwhm_hz);
    meta["bin_fwhm_hz"] = buf;

    Tensor t;
    t.shape = {static_cast<int>(stack.bins.size()), rows, cols};
    t.axes = {"bin", "row", "col"};
    t.units = "signal";
    t.meta = std::move(meta);
    t.values.reserve(stack.bins.size() * stack.bins.front().data.size());
    for (const Image& b : stack.bins)
        for (double x : b.data.values())
            t.values.push_back(static_cast<float>(x));
    return t;
}

inline SpectralBinStack stack_from_tensor(const Tensor& t) {
    require(t.shape.size() == 3, "expected a 3-d stack tensor");
    const int nb = t.shape[0], rows = t.shape[1], cols = t.shape[2];

    SpectralBinStack stack;
    const auto it = t.meta.find("bin_centers_hz");
    require(it != t.meta.end(), "stack tensor missing bin_centers_hz metadata");
    std::size_t pos = 0;
    const std::string& s = it->second;
    while (pos < s.size()) {
        std::size_t end = s.find(',', pos);
        if (end == std::string::npos)
            end = s.size();
        stack.spec.centers_hz.push_back(std::stod(s.substr(pos, end - pos)));
        pos = end + 1;
    }
    const auto fw = t.meta.find("bin_fwhm_hz");
    stack.spec.fwhm_hz = fw != t.meta.end() ? std::stod(fw->second) : 2250.0;
    require(static_cast<int>(stack.spec.centers_hz.size()) == nb,
            "bin_centers_hz count does not match tensor shape");

    stack.bins.reserve(static_cast<std::size_t>(nb));
    const std::size_t plane = static_cast<std::size_t>(rows) * cols;
    for (int b = 0; b < nb; ++b) {
        Image img{Grid<double>(rows, cols)};
        for (std::size_t i = 0; i < plane; ++i)
            img.data[i] = static_cast<double>(t.values[static_cast<std::size_t>(b) * plane + i]);
        stack.bins.push_back(std::move(img));
    }
    stack.validate();
    return stack;
}

}  // namespace dpmr
