#pragma once

// Artifact persistence: little-endian float64 payloads with JSON sidecars,
// 8-bit PNG previews, RE history CSV and SHA-256 file digests.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>
#include <png.h>

#include "error.hpp"
#include "geometry.hpp"

namespace msct::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct ArrayHeader {
    std::string kind; // "sinogram" | "image"
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::string units;
};

inline fs::path sidecar_path(const fs::path& payload)
{
    fs::path p = payload;
    return p.replace_extension(".json");
}

inline void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::io, "cannot write " + path.string());
    out << text;
}

inline std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const fs::path& path)
{
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::io, path.string() + ": " + e.what());
    }
}

/// Writes `payload` (.f64) and its sidecar (.json). Extra sidecar fields may be
/// passed in `extra`.
inline void write_array(const fs::path& payload, const ArrayHeader& h, std::span<const double> values,
    const json& extra = json::object())
{
    require(values.size() == h.rows * h.cols, "array payload does not match its shape");
    std::vector<std::uint64_t> words(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t w = std::bit_cast<std::uint64_t>(values[i]);
        if constexpr (std::endian::native == std::endian::big)
            w = __builtin_bswap64(w);
        words[i] = w;
    }
    {
        std::ofstream out(payload, std::ios::binary);
        if (!out)
            throw Error(ErrorKind::io, "cannot write " + payload.string());
        out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 8));
    }
    json side = json::object();
    side["kind"] = h.kind;
    side["shape"] = { h.rows, h.cols };
    side["units"] = h.units;
    for (auto it = extra.begin(); it != extra.end(); ++it)
        side[it.key()] = it.value();
    write_json(sidecar_path(payload), side);
}

inline std::vector<double> read_array(const fs::path& payload, ArrayHeader* header = nullptr)
{
    const json side = read_json(sidecar_path(payload));
    ArrayHeader h;
    try {
        h.kind = side.at("kind").get<std::string>();
        h.rows = side.at("shape").at(0).get<std::size_t>();
        h.cols = side.at("shape").at(1).get<std::size_t>();
        h.units = side.value("units", "");
    } catch (const json::exception& e) {
        throw Error(ErrorKind::io, sidecar_path(payload).string() + ": " + e.what());
    }
    const std::string bytes = read_text(payload);
    if (bytes.size() != h.rows * h.cols * 8)
        throw Error(ErrorKind::io, payload.string() + ": payload size does not match sidecar shape");
    std::vector<double> values(h.rows * h.cols);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t w;
        std::memcpy(&w, bytes.data() + 8 * i, 8);
        if constexpr (std::endian::native == std::endian::big)
            w = __builtin_bswap64(w);
        values[i] = std::bit_cast<double>(w);
    }
    if (header)
        *header = h;
    return values;
}

inline void write_sinogram(const fs::path& payload, const Sinogram& s, const std::string& units,
    const json& extra = json::object())
{
    write_array(payload, { "sinogram", s.n_views, s.n_bins, units }, s.values, extra);
}

inline Sinogram read_sinogram(const fs::path& payload)
{
    ArrayHeader h;
    auto v = read_array(payload, &h);
    if (h.kind != "sinogram")
        throw Error(ErrorKind::io, payload.string() + ": expected a sinogram, found " + h.kind);
    Sinogram s(h.rows, h.cols);
    s.values = std::move(v);
    return s;
}

inline void write_image(const fs::path& payload, const Image& img, const std::string& units,
    const json& extra = json::object())
{
    write_array(payload, { "image", img.grid.ny, img.grid.nx, units }, img.values, extra);
}

inline Image read_image(const fs::path& payload, const Grid& grid)
{
    ArrayHeader h;
    auto v = read_array(payload, &h);
    if (h.kind != "image")
        throw Error(ErrorKind::io, payload.string() + ": expected an image, found " + h.kind);
    if (h.rows != grid.ny || h.cols != grid.nx)
        throw Error(ErrorKind::io, payload.string() + ": image shape does not match the grid");
    Image img(grid);
    img.values = std::move(v);
    return img;
}

/// 8-bit grayscale preview, linearly windowed to [lo, hi]. Returns the window.
inline std::pair<double, double> write_png(const fs::path& path, std::span<const double> values, std::size_t rows,
    std::size_t cols)
{
    require(values.size() == rows * cols && rows > 0 && cols > 0, "PNG shape mismatch");
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    const double lo = *mn, hi = *mx;
    const double span = hi > lo ? hi - lo : 1.0;
    std::vector<png_byte> pixels(rows * cols);
    for (std::size_t i = 0; i < pixels.size(); ++i)
        pixels[i] = static_cast<png_byte>(std::clamp(std::lround(255.0 * (values[i] - lo) / span), 0L, 255L));

    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp)
        throw Error(ErrorKind::io, "cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw Error(ErrorKind::io, "libpng failed writing " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows), 8, PNG_COLOR_TYPE_GRAY,
        PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t r = 0; r < rows; ++r)
        png_write_row(png, pixels.data() + r * cols);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    return { lo, hi };
}

inline void write_re_csv(const fs::path& path, std::span<const double> re_history)
{
    std::ostringstream out;
    out << "iteration,re\n";
    char buf[64];
    for (std::size_t n = 0; n < re_history.size(); ++n) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", n + 1, re_history[n]);
        out << buf;
    }
    write_text(path, out.str());
}

inline std::vector<double> read_re_csv(const fs::path& path)
{
    std::istringstream in(read_text(path));
    std::string line;
    std::getline(in, line);
    if (line != "iteration,re")
        throw Error(ErrorKind::io, path.string() + ": bad RE header");
    std::vector<double> re;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            continue;
        re.push_back(std::stod(line.substr(comma + 1)));
    }
    return re;
}

inline std::string sha256_hex(const std::string& bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::io, "SHA-256 digest failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i)
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return hex.str();
}

inline std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

} // namespace msct::io
