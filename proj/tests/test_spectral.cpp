#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "dpmr/metrics.hpp"
#include "dpmr/spectral.hpp"
#include "support.hpp"

using namespace dpmr;

namespace {

SpectralBinSpec spec_of(std::size_t n) {
    SpectralBinSpec s;
    for (std::size_t i = 0; i < n; ++i)
        s.centers_hz.push_back(-1000.0 + 100.0 * static_cast<double>(i));
    s.fwhm_hz = 2250.0;
    return s;
}

SpectralBinStack random_stack(Rng& rng, std::size_t nbins, int n) {
    SpectralBinStack st;
    st.spec = spec_of(nbins);
    for (std::size_t b = 0; b < nbins; ++b)
        st.bins.push_back(Image{rng.uniform_grid(n, n, 0.0, 2.0)});
    return st;
}

}  // namespace

TEST_CASE("rsos of a single non-negative bin returns that bin") {
    Rng rng(300);
    SpectralBinStack st = random_stack(rng, 1, 8);
    const Image out = rsos(st);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        CHECK(out.data[i] == Approx(st.bins[0].data[i]).epsilon(1e-15));
}

TEST_CASE("rsos combines 3 and 4 into 5") {
    SpectralBinStack st;
    st.spec = spec_of(2);
    st.bins.push_back(Image{Grid<double>(2, 2, 3.0)});
    st.bins.push_back(Image{Grid<double>(2, 2, 4.0)});
    const Image out = rsos(st);
    for (double v : out.data.values())
        CHECK(v == Approx(5.0).margin(1e-12));
}

TEST_CASE("rsos of 24 random bins matches the brute-force loop") {
    Rng rng(301);
    SpectralBinStack st = random_stack(rng, 24, 12);
    const Image out = rsos(st);
    for (int r = 0; r < 12; ++r)
        for (int c = 0; c < 12; ++c) {
            double acc = 0.0;
            for (const Image& b : st.bins)
                acc += b.data(r, c) * b.data(r, c);
            CHECK(out.data(r, c) == Approx(std::sqrt(acc)).epsilon(1e-6));
        }
}

TEST_CASE("rsos is invariant under bin permutation, bitwise") {
    Rng rng(302);
    SpectralBinStack st = random_stack(rng, 8, 10);
    SpectralBinStack shuffled = st;
    std::mt19937 mix(99);
    std::shuffle(shuffled.bins.begin(), shuffled.bins.end(), mix);
    CHECK(rsos(st).data == rsos(shuffled).data);
}

TEST_CASE("rsos grows when any bin magnitude grows") {
    Rng rng(303);
    SpectralBinStack st = random_stack(rng, 4, 6);
    const Image before = rsos(st);
    st.bins[2].data(3, 3) += 1.0;
    const Image after = rsos(st);
    CHECK(after.data(3, 3) > before.data(3, 3));
}

TEST_CASE("rsos rejects an empty stack") {
    SpectralBinStack st;
    st.spec.fwhm_hz = 2250.0;
    CHECK_THROWS_AS(rsos(st), ValidationError);
}

TEST_CASE("mavric: zero field gives identical outputs equal to the undistorted RSOS") {
    Rng rng(304);
    const int n = 24;
    AcquisitionParams p{780.0, +1, n, n};
    const Image i0 = testsupport::smooth_image(rng, n, n);
    const FieldMap dv = constant_field(n, n, 0.0);
    const SpectralBinSpec bins = SpectralBinSpec::default_table();

    const auto [pos, neg] = mavric_combine(i0, dv, bins, p);
    CHECK(pos.data == neg.data);
    CHECK(pos.data == rsos(make_bin_stack(i0, dv, bins)).data);
}

TEST_CASE("mavric: constant field shifts the baseline one pixel each way") {
    Rng rng(305);
    const int n = 32;
    AcquisitionParams p{780.0, +1, n, n};
    const Image i0 = testsupport::smooth_image(rng, n, n);
    const SpectralBinSpec bins = SpectralBinSpec::default_table();

    const auto [pos, neg] = mavric_combine(i0, constant_field(n, n, 780.0), bins, p);

    // the undistorted comparison stack must carry the same constant-field
    // bin weighting; only the geometry shifts
    const Image base = rsos(make_bin_stack(i0, constant_field(n, n, 780.0), bins));
    for (int r = 0; r < n; ++r)
        for (int c = 1; c + 1 < n; ++c) {
            CHECK(pos.data(r, c) == Approx(base.data(r, c - 1)).epsilon(1e-9));
            CHECK(neg.data(r, c) == Approx(base.data(r, c + 1)).epsilon(1e-9));
        }
}

TEST_CASE("mavric outputs are mirror images under field negation, bitwise") {
    Rng rng(306);
    const int n = 20;
    AcquisitionParams p{780.0, +1, n, n};
    const Image i0 = testsupport::smooth_image(rng, n, n);
    FieldMap dv = testsupport::smooth_interior_field(rng, n, n, 1.2, 2, 780.0);
    FieldMap neg_dv = dv;
    for (auto& x : neg_dv.data.values())
        x = -x;
    const SpectralBinSpec bins = SpectralBinSpec::default_table();

    const auto [pos_a, neg_a] = mavric_combine(i0, dv, bins, p);
    const auto [pos_b, neg_b] = mavric_combine(i0, neg_dv, bins, p);
    CHECK(pos_a.data == neg_b.data);
    CHECK(neg_a.data == pos_b.data);
}

TEST_CASE("mavric baselines place the artifacts on opposite sides of the metal") {
    const int n = 64;
    AcquisitionParams p{780.0, +1, n, n};
    PhantomSpec ps;
    ps.height = ps.width = n;
    ps.metal_radius = 6.0;
    const Image i0 = make_grid_phantom(ps);
    DipoleFieldSpec ds;
    ds.core_radius = 6.0;
    ds.amplitude_hz = 2340.0;
    const FieldMap dv = dipole_field(ds, n, n);
    const SpectralBinSpec bins = SpectralBinSpec::default_table();

    const auto [pos, neg] = mavric_combine(i0, dv, bins, p);
    CHECK(nrmse(pos, neg) > 0.01);
}

TEST_CASE("correct_stack on undistorted stacks reproduces the RSOS") {
    Rng rng(307);
    const int n = 16;
    AcquisitionParams p{780.0, +1, n, n};
    const Image i0 = testsupport::smooth_image(rng, n, n);
    const FieldMap dv = constant_field(n, n, 0.0);
    SpectralBinSpec bins;
    bins.centers_hz = {-1000.0, 0.0, 1000.0};
    bins.fwhm_hz = 2250.0;

    const SpectralBinStack stack = make_bin_stack(i0, dv, bins);
    SolverConfig cfg = SolverConfig::defaults_for(p);
    cfg.max_iters = 60;

    const StackCorrectionResult res = correct_stack(stack, stack, p, cfg);
    CHECK(res.bin_traces.size() == 3);
    CHECK(nrmse(res.combined, rsos(stack)) < 1e-3);
}

TEST_CASE("correct_stack results do not depend on the thread count") {
    Rng rng(308);
    const int n = 16;
    AcquisitionParams p{780.0, +1, n, n};
    const Image i0 = testsupport::smooth_image(rng, n, n);
    const FieldMap dv = testsupport::smooth_interior_field(rng, n, n, 1.0, 2, 780.0);
    SpectralBinSpec bins;
    bins.centers_hz = {-500.0, 0.0, 500.0, 1000.0};
    bins.fwhm_hz = 2250.0;

    const SpectralBinStack stack0 = make_bin_stack(i0, dv, bins);
    SpectralBinStack sp, sn;
    sp.spec = sn.spec = bins;
    for (const Image& b : stack0.bins) {
        sp.bins.push_back(distort_splat(b, dv, p.with_polarity(+1)));
        sn.bins.push_back(distort_splat(b, dv, p.with_polarity(-1)));
    }

    SolverConfig cfg = SolverConfig::defaults_for(p);
    cfg.learning_rate = 4.0;
    cfg.max_iters = 120;
    cfg.rel_tol = 0.0;

    const StackCorrectionResult one = correct_stack(sp, sn, p, cfg, 1);
    const StackCorrectionResult four = correct_stack(sp, sn, p, cfg, 4);
    CHECK(one.combined.data == four.combined.data);
}

TEST_CASE("correct_stack reports the failing bin index") {
    Rng rng(310);
    const int n = 8;
    AcquisitionParams p{780.0, +1, n, n};
    SpectralBinStack sp = random_stack(rng, 3, n), sn = sp;
    sn.bins[1].data(2, 2) = -1.0;  // solve rejects negative intensities
    SolverConfig cfg = SolverConfig::defaults_for(p);
    cfg.max_iters = 5;
    try {
        correct_stack(sp, sn, p, cfg);
        FAIL("expected a per-bin validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("bin 1") != std::string::npos);
    }
}

TEST_CASE("stack tensors round-trip with their bin table") {
    Rng rng(309);
    SpectralBinStack st = random_stack(rng, 5, 7);
    testsupport::TempDir dir("stack_io");
    const std::string path = dir.file("stack.dpmr");
    write_tensor(path, tensor_from_stack(st));
    const SpectralBinStack back = stack_from_tensor(read_tensor(path));
    REQUIRE(back.bins.size() == st.bins.size());
    CHECK(back.spec.centers_hz == st.spec.centers_hz);
    CHECK(back.spec.fwhm_hz == st.spec.fwhm_hz);
    for (std::size_t b = 0; b < st.bins.size(); ++b)
        for (std::size_t i = 0; i < st.bins[b].data.size(); ++i)
            CHECK(back.bins[b].data[i] == static_cast<float>(st.bins[b].data[i]));
}
