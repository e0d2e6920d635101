#include <catch2/catch.hpp>

#include <cstring>
#include <fstream>

#include "dpmr/io.hpp"
#include "dpmr/rng.hpp"
#include "support.hpp"

using namespace dpmr;
using testsupport::TempDir;

namespace {

std::vector<char> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::vector<char>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("tensor round trip reproduces a 2x2 grid bit-exactly") {
    TempDir dir("io_2x2");
    Tensor t;
    t.shape = {2, 2};
    t.axes = {"row", "col"};
    t.units = "signal";
    t.meta = {{"note", "four values"}};
    t.values = {1.0f, 2.0f, 3.0f, 4.0f};

    const std::string path = dir.file("t.dpmr");
    write_tensor(path, t);

    const Tensor back = read_tensor(path);
    CHECK(back.shape == t.shape);
    CHECK(back.axes == t.axes);
    CHECK(back.units == t.units);
    CHECK(back.meta == t.meta);
    REQUIRE(back.values.size() == 4);
    CHECK(std::memcmp(back.values.data(), t.values.data(), 16) == 0);

    // payload is exactly 16 bytes after the header
    const auto bytes = slurp(path);
    const std::uint32_t hlen = static_cast<std::uint8_t>(bytes[4]) |
                               (static_cast<std::uint8_t>(bytes[5]) << 8) |
                               (static_cast<std::uint8_t>(bytes[6]) << 16) |
                               (static_cast<std::uint8_t>(bytes[7]) << 24);
    CHECK(bytes.size() == 8 + hlen + 16);
}

TEST_CASE("tensor round trip of the degenerate 1x1 zero grid") {
    TempDir dir("io_1x1");
    Tensor t;
    t.shape = {1, 1};
    t.values = {0.0f};
    const std::string path = dir.file("z.dpmr");
    write_tensor(path, t);
    const Tensor back = read_tensor(path);
    REQUIRE(back.values.size() == 1);
    CHECK(back.values[0] == 0.0f);
    CHECK(back.shape == std::vector<int>{1, 1});
}

TEST_CASE("160x160 seeded random tensor survives a byte-exact round trip") {
    TempDir dir("io_random");
    Rng rng(20240160);
    Tensor t;
    t.shape = {160, 160};
    t.values.reserve(160 * 160);
    for (int i = 0; i < 160 * 160; ++i)
        t.values.push_back(static_cast<float>(rng.uniform(-1000.0, 1000.0)));

    const std::string a = dir.file("a.dpmr");
    const std::string b = dir.file("b.dpmr");
    write_tensor(a, t);
    const Tensor back = read_tensor(a);
    REQUIRE(back.values.size() == t.values.size());
    CHECK(std::memcmp(back.values.data(), t.values.data(), 4 * t.values.size()) == 0);

    // writing what was read yields an identical file
    write_tensor(b, back);
    CHECK(slurp(a) == slurp(b));
}

TEST_CASE("round trip is the identity for random finite f32 tensors") {
    TempDir dir("io_prop");
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor t;
        const int rows = 1 + static_cast<int>(rng.next_u64() % 12);
        const int cols = 1 + static_cast<int>(rng.next_u64() % 12);
        t.shape = {rows, cols};
        for (int i = 0; i < rows * cols; ++i)
            t.values.push_back(static_cast<float>(rng.uniform(-1e6, 1e6)));
        const std::string path = dir.file("p" + std::to_string(trial) + ".dpmr");
        write_tensor(path, t);
        const Tensor back = read_tensor(path);
        CHECK(std::memcmp(back.values.data(), t.values.data(), 4 * t.values.size()) == 0);
    }
}

TEST_CASE("write_tensor rejects non-finite values and bad paths") {
    TempDir dir("io_err");
    Tensor t;
    t.shape = {1, 2};
    t.values = {1.0f, std::numeric_limits<float>::quiet_NaN()};
    CHECK_THROWS_AS(write_tensor(dir.file("nan.dpmr"), t), ValidationError);

    t.values = {1.0f, 2.0f};
    CHECK_THROWS_AS(write_tensor("/nonexistent-dir/x.dpmr", t), IoError);
}

TEST_CASE("reader rejects shape/payload length mismatches") {
    TempDir dir("io_corrupt");
    Tensor t;
    t.shape = {4, 4};
    t.values.assign(16, 1.5f);
    const std::string path = dir.file("ok.dpmr");
    write_tensor(path, t);

    // truncate the payload by one value
    auto bytes = slurp(path);
    bytes.resize(bytes.size() - 4);
    const std::string shorter = dir.file("short.dpmr");
    std::ofstream(shorter, std::ios::binary).write(bytes.data(), static_cast<long>(bytes.size()));
    CHECK_THROWS_AS(read_tensor(shorter), ValidationError);

    // extend the payload by one value
    bytes = slurp(path);
    bytes.insert(bytes.end(), {0, 0, 0, 0});
    const std::string longer = dir.file("long.dpmr");
    std::ofstream(longer, std::ios::binary).write(bytes.data(), static_cast<long>(bytes.size()));
    CHECK_THROWS_AS(read_tensor(longer), ValidationError);

    // wrong magic
    bytes = slurp(path);
    bytes[0] = 'X';
    const std::string magic = dir.file("magic.dpmr");
    std::ofstream(magic, std::ios::binary).write(bytes.data(), static_cast<long>(bytes.size()));
    CHECK_THROWS_AS(read_tensor(magic), ValidationError);
}

TEST_CASE("export_image quantizes endpoints, constants and midpoints as documented") {
    TempDir dir("io_pgm");

    SECTION("[0,1] minmax maps to 0 and 255") {
        Image img{Grid<double>::from_rows({{0.0, 1.0}})};
        export_image(img, dir.file("a.pgm"));
        const auto p = testsupport::read_pgm(dir.file("a.pgm"));
        CHECK(p.width == 2);
        CHECK(p.height == 1);
        CHECK(p.bytes == std::vector<std::uint8_t>{0, 255});
    }

    SECTION("constant image under minmax maps to all zeros") {
        Image img{Grid<double>::from_rows({{5.0, 5.0}})};
        export_image(img, dir.file("b.pgm"));
        const auto p = testsupport::read_pgm(dir.file("b.pgm"));
        CHECK(p.bytes == std::vector<std::uint8_t>{0, 0});
    }

    SECTION("0.5 rounds half up to 128") {
        Image img{Grid<double>::from_rows({{0.0, 0.5, 1.0}})};
        export_image(img, dir.file("c.pgm"));
        const auto p = testsupport::read_pgm(dir.file("c.pgm"));
        CHECK(p.bytes == std::vector<std::uint8_t>{0, 128, 255});
    }

    SECTION("fixed range clamps out-of-range values") {
        Image img{Grid<double>::from_rows({{-1.0, 2.0, 1.0}})};
        export_image(img, dir.file("d.pgm"), std::make_pair(0.0, 2.0));
        const auto p = testsupport::read_pgm(dir.file("d.pgm"));
        CHECK(p.bytes == std::vector<std::uint8_t>{0, 255, 128});
    }
}

TEST_CASE("grid/tensor conversion carries shape and values") {
    Grid<double> g = Grid<double>::from_rows({{1.5, -2.0, 0.25}, {4.0, 5.0, 6.0}});
    const Tensor t = tensor_from_grid(g, "Hz", {{"k", "v"}});
    CHECK(t.shape == std::vector<int>{2, 3});
    CHECK(t.units == "Hz");
    const Grid<double> back = grid_from_tensor(t);
    CHECK(back == g);
}
