#pragma once

// Bit-exact tensor files and 8-bit raster export.
//
// Tensor file layout:
//   bytes 0..3   magic "DPMR"
//   bytes 4..7   u32 little-endian header length H
//   bytes 8..8+H UTF-8 JSON header: {"axes":[...], "dtype":"f32",
//                "meta":{...}, "shape":[...], "units":"..."}
//   rest         payload, little-endian float32, row-major,
//                4 * product(shape) bytes
//
// The header is self-describing; readers reject any shape/payload length
// mismatch. Raster export writes binary PGM (P5) with round-half-up
// quantization; a constant image under minmax scaling maps to all zeros.

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dpmr/types.hpp"

namespace dpmr {

struct Tensor {
    std::vector<int> shape;
    std::vector<std::string> axes;
    std::string units;
    std::map<std::string, std::string> meta;
    std::vector<float> values;  // row-major
};

namespace detail {

inline std::size_t shape_product(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape)
        n *= static_cast<std::size_t>(d);
    return n;
}

inline bool is_little_endian() {
    const std::uint32_t one = 1;
    std::uint8_t b;
    std::memcpy(&b, &one, 1);
    return b == 1;
}

inline void byteswap_f32(std::vector<float>& v) {
    for (float& x : v) {
        std::uint32_t u;
        std::memcpy(&u, &x, 4);
        u = ((u & 0x000000ffu) << 24) | ((u & 0x0000ff00u) << 8) |
            ((u & 0x00ff0000u) >> 8) | ((u & 0xff000000u) >> 24);
        std::memcpy(&x, &u, 4);
    }
}

}  // namespace detail

inline void validate_tensor(const Tensor& t) {
    require(!t.shape.empty(), "tensor shape must be non-empty");
    for (int d : t.shape)
        require(d >= 1, "tensor dims must be >= 1");
    require(t.values.size() == detail::shape_product(t.shape),
            "tensor value count does not match shape");
    for (float x : t.values)
        require(std::isfinite(x), "tensor contains non-finite values");
}

inline void write_tensor(const std::string& path, const Tensor& t) {
    validate_tensor(t);

    nlohmann::json header;
    header["dtype"] = "f32";
    header["shape"] = t.shape;
    header["axes"] = t.axes;
    header["units"] = t.units;
    header["meta"] = t.meta;
    const std::string htext = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open for writing: " + path);

    f.write("DPMR", 4);
    const std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
    std::array<char, 4> lenb{static_cast<char>(hlen & 0xff), static_cast<char>((hlen >> 8) & 0xff),
                             static_cast<char>((hlen >> 16) & 0xff),
                             static_cast<char>((hlen >> 24) & 0xff)};
    f.write(lenb.data(), 4);
    f.write(htext.data(), static_cast<std::streamsize>(htext.size()));

    std::vector<float> payload = t.values;
    if (!detail::is_little_endian())
        detail::byteswap_f32(payload);
    f.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * 4));
    if (!f)
        throw IoError("write failed: " + path);
}

inline Tensor read_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open for reading: " + path);

    std::array<char, 4> magic{};
    f.read(magic.data(), 4);
    if (!f || std::memcmp(magic.data(), "DPMR", 4) != 0)
        throw ValidationError("not a DPMR tensor file: " + path);

    std::array<unsigned char, 4> lenb{};
    f.read(reinterpret_cast<char*>(lenb.data()), 4);
    if (!f)
        throw IoError("truncated header length: " + path);
    const std::uint32_t hlen = static_cast<std::uint32_t>(lenb[0]) |
                               (static_cast<std::uint32_t>(lenb[1]) << 8) |
                               (static_cast<std::uint32_t>(lenb[2]) << 16) |
                               (static_cast<std::uint32_t>(lenb[3]) << 24);
    if (hlen > (1u << 20))
        throw ValidationError("implausible header length: " + path);

    std::string htext(hlen, '\0');
    f.read(htext.data(), hlen);
    if (!f)
        throw IoError("truncated header: " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(htext);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("bad tensor header: ") + e.what());
    }

    Tensor t;
    if (header.value("dtype", "") != "f32")
        throw ValidationError("unsupported dtype in " + path);
    t.shape = header.at("shape").get<std::vector<int>>();
    require(!t.shape.empty(), "empty shape in header");
    for (int d : t.shape)
        require(d >= 1, "non-positive dim in header");
    if (header.contains("axes"))
        t.axes = header["axes"].get<std::vector<std::string>>();
    t.units = header.value("units", "");
    if (header.contains("meta"))
        t.meta = header["meta"].get<std::map<std::string, std::string>>();

    const std::size_t n = detail::shape_product(t.shape);
    t.values.resize(n);
    f.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(n * 4));
    if (static_cast<std::size_t>(f.gcount()) != n * 4)
        throw ValidationError("payload shorter than header shape: " + path);
    char extra;
    if (f.read(&extra, 1), f.gcount() != 0)
        throw ValidationError("payload longer than header shape: " + path);
    if (!detail::is_little_endian())
        detail::byteswap_f32(t.values);
    return t;
}

// Grid <-> tensor conversion. In-memory grids are double; payload is f32.

inline Tensor tensor_from_grid(const Grid<double>& g, std::string units = "",
                               std::map<std::string, std::string> meta = {}) {
    Tensor t;
    t.shape = {g.rows(), g.cols()};
    t.axes = {"row", "col"};
    t.units = std::move(units);
    t.meta = std::move(meta);
    t.values.reserve(g.size());
    for (double x : g.values())
        t.values.push_back(static_cast<float>(x));
    return t;
}

inline Grid<double> grid_from_tensor(const Tensor& t) {
    require(t.shape.size() == 2, "expected a 2-d tensor");
    Grid<double> g(t.shape[0], t.shape[1]);
    for (std::size_t i = 0; i < t.values.size(); ++i)
        g[i] = static_cast<double>(t.values[i]);
    return g;
}

// PGM export. scale: minmax by default, or a fixed (lo, hi) range.

inline void export_image(const Image& img, const std::string& path,
                         std::optional<std::pair<double, double>> fixed_range = std::nullopt) {
    require(grid_all_finite(img.data), "export_image: image must be finite");

    double lo, hi;
    if (fixed_range) {
        lo = fixed_range->first;
        hi = fixed_range->second;
        require(hi > lo, "export_image: fixed range must have hi > lo");
    } else {
        lo = grid_min(img.data);
        hi = grid_max(img.data);
    }

    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open for writing: " + path);
    f << "P5\n" << img.cols() << " " << img.rows() << "\n255\n";

    std::vector<unsigned char> bytes;
    bytes.reserve(img.data.size());
    const double span = hi - lo;
    for (double x : img.data.values()) {
        double q = 0.0;
        if (span > 0.0) {
            double t = (x - lo) / span;
            t = std::min(1.0, std::max(0.0, t));
            q = std::floor(t * 255.0 + 0.5);  // round half up
        }
        bytes.push_back(static_cast<unsigned char>(q));
    }
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f)
        throw IoError("write failed: " + path);
}

// FNV-1a over file bytes; used for manifest artifact hashes.
inline std::string hash_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open for hashing: " + path);
    std::uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (f.read(buf, sizeof(buf)), f.gcount() > 0) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    char out[19];
    std::snprintf(out, sizeof(out), "0x%016llx", static_cast<unsigned long long>(h));
    return std::string(out);
}

}  // namespace dpmr
