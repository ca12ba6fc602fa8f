#pragma once

// Frame-directory and raw-container I/O. PNG support needs libpng (link PNG::PNG).

#include "trecs/frame.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace trecs {

/// Raised for unreadable or unwritable files; distinct from argument errors.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FrameFormat { png, ppm, trsq };

inline const char* extension(FrameFormat f)
{
    switch (f) {
    case FrameFormat::png:
        return ".png";
    case FrameFormat::ppm:
        return ".ppm";
    case FrameFormat::trsq:
        return ".trsq";
    }
    return "";
}

/// Round half up, clamp into [0, 255].
inline std::uint8_t quantize(double v)
{
    const double r = std::floor(v + 0.5);
    return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

namespace detail {

inline std::vector<std::uint8_t> quantize_frame(const Frame& f)
{
    std::vector<std::uint8_t> out(f.values().size());
    std::transform(f.values().begin(), f.values().end(), out.begin(), quantize);
    return out;
}

inline Frame promote(Shape shape, const std::uint8_t* data)
{
    std::vector<double> values(shape.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        values[k] = data[k];
    }
    return Frame(shape, std::move(values));
}

inline std::vector<char> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& path, const void* data, std::size_t size)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write '" + path.string() + "'");
    }
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) {
        throw IoError("short write to '" + path.string() + "'");
    }
}

inline void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v)
{
    for (int k = 0; k < 4; ++k) {
        buf.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
    }
}

inline std::uint32_t get_u32(const std::vector<char>& buf, std::size_t at)
{
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + static_cast<std::size_t>(k)])) << (8 * k);
    }
    return v;
}

struct PngFile {
    std::FILE* fp = nullptr;
    ~PngFile()
    {
        if (fp) {
            std::fclose(fp);
        }
    }
};

} // namespace detail

// --- PPM / PGM (binary P6 / P5, maxval 255) ---------------------------------

inline Frame read_pnm(const std::filesystem::path& path)
{
    const auto bytes = detail::read_file(path);
    std::size_t pos = 0;
    auto next_token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') {
                    ++pos;
                }
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        std::string tok;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
            tok.push_back(bytes[pos++]);
        }
        return tok;
    };
    const std::string magic = next_token();
    if (magic != "P6" && magic != "P5") {
        throw IoError("'" + path.string() + "' is not a binary PPM/PGM file");
    }
    const std::size_t channels = magic == "P6" ? 3 : 1;
    std::size_t w = 0;
    std::size_t h = 0;
    int maxval = 0;
    try {
        w = std::stoul(next_token());
        h = std::stoul(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        throw IoError("malformed header in '" + path.string() + "'");
    }
    if (maxval != 255 || w == 0 || h == 0) {
        throw IoError("'" + path.string() + "' must be a non-empty 8-bit image");
    }
    ++pos; // single whitespace after maxval
    const Shape shape{h, w, channels};
    if (bytes.size() < pos + shape.size()) {
        throw IoError("'" + path.string() + "' is truncated");
    }
    return detail::promote(shape, reinterpret_cast<const std::uint8_t*>(bytes.data() + pos));
}

inline void write_pnm(const std::filesystem::path& path, const Frame& f)
{
    if (f.channels() != 1 && f.channels() != 3) {
        throw std::invalid_argument("PPM/PGM output needs 1 or 3 channels");
    }
    const std::string header = std::string(f.channels() == 3 ? "P6" : "P5") + "\n" + std::to_string(f.width()) + " " +
                               std::to_string(f.height()) + "\n255\n";
    std::vector<std::uint8_t> buf(header.begin(), header.end());
    const auto px = detail::quantize_frame(f);
    buf.insert(buf.end(), px.begin(), px.end());
    detail::write_file(path, buf.data(), buf.size());
}

// --- PNG (8-bit gray, gray+alpha, RGB, RGBA) --------------------------------

namespace detail {

// libpng reports failure by longjmp, so each setjmp lives in a function that owns no
// C++ objects; callers translate the false return into an exception.

inline bool png_read_header(png_structp png, png_infop info, std::FILE* fp, Shape* shape)
{
    if (setjmp(png_jmpbuf(png))) {
        return false;
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (png_get_bit_depth(png, info) < 8) {
        png_set_expand(png);
    }
    if (png_get_bit_depth(png, info) == 16) {
        png_set_strip_16(png);
    }
    png_read_update_info(png, info);
    *shape = Shape{png_get_image_height(png, info), png_get_image_width(png, info), png_get_channels(png, info)};
    return true;
}

inline bool png_read_pixels(png_structp png, png_bytepp rows)
{
    if (setjmp(png_jmpbuf(png))) {
        return false;
    }
    png_read_image(png, rows);
    png_read_end(png, nullptr);
    return true;
}

inline bool png_write_all(png_structp png, png_infop info, std::FILE* fp, const Shape* shape, int color,
                          png_bytepp rows)
{
    if (setjmp(png_jmpbuf(png))) {
        return false;
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(shape->width), static_cast<png_uint_32>(shape->height), 8, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_rows(png, rows, static_cast<png_uint_32>(shape->height));
    png_write_end(png, nullptr);
    return true;
}

} // namespace detail

inline Frame read_png(const std::filesystem::path& path)
{
    detail::PngFile file{std::fopen(path.c_str(), "rb")};
    if (!file.fp) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng initialisation failed");
    }
    Shape shape;
    if (!detail::png_read_header(png, info, file.fp, &shape) || shape.size() == 0) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("'" + path.string() + "' is not a readable PNG file");
    }
    std::vector<std::uint8_t> pixels(shape.size());
    std::vector<png_bytep> rows(shape.height);
    for (std::size_t y = 0; y < shape.height; ++y) {
        rows[y] = pixels.data() + y * shape.width * shape.channels;
    }
    const bool ok = detail::png_read_pixels(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    if (!ok) {
        throw IoError("'" + path.string() + "' is not a readable PNG file");
    }
    return detail::promote(shape, pixels.data());
}

inline void write_png(const std::filesystem::path& path, const Frame& f)
{
    int color = 0;
    switch (f.channels()) {
    case 1:
        color = PNG_COLOR_TYPE_GRAY;
        break;
    case 2:
        color = PNG_COLOR_TYPE_GRAY_ALPHA;
        break;
    case 3:
        color = PNG_COLOR_TYPE_RGB;
        break;
    case 4:
        color = PNG_COLOR_TYPE_RGBA;
        break;
    default:
        throw std::invalid_argument("PNG output needs 1 to 4 channels");
    }
    auto px = detail::quantize_frame(f);
    std::vector<png_bytep> rows(f.height());
    for (std::size_t y = 0; y < f.height(); ++y) {
        rows[y] = px.data() + y * f.width() * f.channels();
    }
    detail::PngFile file{std::fopen(path.c_str(), "wb")};
    if (!file.fp) {
        throw IoError("cannot write '" + path.string() + "'");
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng initialisation failed");
    }
    const Shape shape = f.shape();
    const bool ok = detail::png_write_all(png, info, file.fp, &shape, color, rows.data());
    png_destroy_write_struct(&png, &info);
    if (!ok) {
        throw IoError("failed writing PNG '" + path.string() + "'");
    }
}

// --- Raw container: "TRSQ", u32 H, W, C, N (little endian), then N*H*W*C bytes ------

inline FrameSequence read_trsq(const std::filesystem::path& path, const std::string& id)
{
    const auto bytes = detail::read_file(path);
    if (bytes.size() < 20 || std::memcmp(bytes.data(), "TRSQ", 4) != 0) {
        throw IoError("'" + path.string() + "' is not a TRSQ container");
    }
    const Shape shape{detail::get_u32(bytes, 4), detail::get_u32(bytes, 8), detail::get_u32(bytes, 12)};
    const std::size_t n = detail::get_u32(bytes, 16);
    if (shape.size() == 0 || n == 0) {
        throw IoError("'" + path.string() + "' has empty dimensions");
    }
    if (bytes.size() != 20 + n * shape.size()) {
        throw IoError("'" + path.string() + "' has the wrong payload size");
    }
    std::vector<Frame> frames;
    frames.reserve(n);
    const auto* data = reinterpret_cast<const std::uint8_t*>(bytes.data() + 20);
    for (std::size_t k = 0; k < n; ++k) {
        frames.push_back(detail::promote(shape, data + k * shape.size()));
    }
    return FrameSequence(id, std::move(frames));
}

inline void write_trsq(const std::filesystem::path& path, const FrameSequence& seq)
{
    std::vector<std::uint8_t> buf{'T', 'R', 'S', 'Q'};
    detail::put_u32(buf, static_cast<std::uint32_t>(seq.shape().height));
    detail::put_u32(buf, static_cast<std::uint32_t>(seq.shape().width));
    detail::put_u32(buf, static_cast<std::uint32_t>(seq.shape().channels));
    detail::put_u32(buf, static_cast<std::uint32_t>(seq.size()));
    for (std::size_t k = 0; k < seq.size(); ++k) {
        const auto px = detail::quantize_frame(seq[k]);
        buf.insert(buf.end(), px.begin(), px.end());
    }
    detail::write_file(path, buf.data(), buf.size());
}

// --- Sequences ---------------------------------------------------------------

inline std::string frame_file_name(std::size_t index, FrameFormat format)
{
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06zu", index);
    return std::string(name) + extension(format);
}

/// Detects the storage format of a sequence path (container file or frame directory).
inline FrameFormat detect_format(const std::filesystem::path& path)
{
    namespace fs = std::filesystem;
    if (fs::is_regular_file(path)) {
        if (path.extension() == ".trsq") {
            return FrameFormat::trsq;
        }
        throw IoError("'" + path.string() + "' is neither a directory nor a .trsq container");
    }
    if (!fs::is_directory(path)) {
        throw IoError("'" + path.string() + "' does not exist");
    }
    bool ppm = false;
    for (const auto& entry : fs::directory_iterator(path)) {
        const auto ext = entry.path().extension();
        if (ext == ".trsq") {
            return FrameFormat::trsq;
        }
        if (ext == ".png" && entry.path().filename().string().starts_with("frame_")) {
            return FrameFormat::png;
        }
        if ((ext == ".ppm" || ext == ".pgm") && entry.path().filename().string().starts_with("frame_")) {
            ppm = true;
        }
    }
    if (ppm) {
        return FrameFormat::ppm;
    }
    throw IoError("'" + path.string() + "' contains no frame files");
}

/// Reads frame_NNNNNN.{png,ppm,pgm} files in name order, or a single .trsq container.
inline FrameSequence read_sequence(const std::filesystem::path& path, const std::string& id)
{
    namespace fs = std::filesystem;
    if (fs::is_regular_file(path)) {
        return read_trsq(path, id);
    }
    if (!fs::is_directory(path)) {
        throw IoError("'" + path.string() + "' does not exist");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
        const auto& p = entry.path();
        if (p.extension() == ".trsq") {
            return read_trsq(p, id);
        }
        const auto ext = p.extension();
        if (p.filename().string().starts_with("frame_") && (ext == ".png" || ext == ".ppm" || ext == ".pgm")) {
            files.push_back(p);
        }
    }
    if (files.empty()) {
        throw IoError("'" + path.string() + "' contains no frame files");
    }
    std::sort(files.begin(), files.end());
    std::vector<Frame> frames;
    frames.reserve(files.size());
    for (const auto& f : files) {
        frames.push_back(f.extension() == ".png" ? read_png(f) : read_pnm(f));
    }
    try {
        return FrameSequence(id, std::move(frames));
    } catch (const std::invalid_argument& e) {
        throw IoError("'" + path.string() + "': " + e.what());
    }
}

/// Writes a sequence into directory `dir` (created if needed), quantizing to 8 bits.
inline void write_sequence(const std::filesystem::path& dir, const FrameSequence& seq, FrameFormat format)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    }
    if (format == FrameFormat::trsq) {
        write_trsq(dir / "frames.trsq", seq);
        return;
    }
    for (std::size_t k = 0; k < seq.size(); ++k) {
        const fs::path file = dir / frame_file_name(k + 1, format);
        if (format == FrameFormat::png) {
            write_png(file, seq[k]);
        } else {
            write_pnm(file, seq[k]);
        }
    }
}

} // namespace trecs
