#include "plq/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <zlib.h>

#include "plq/errors.hpp"
#include "plq/format.hpp"

namespace plq {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw Error("cannot open \"" + path + "\" for reading");
    }
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw Error("cannot open \"" + path + "\" for writing");
    }
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) {
        throw Error("short write to \"" + path + "\"");
    }
}

unsigned char quantize(double v) {
    const long q = std::lround(v * 255.0);
    return static_cast<unsigned char>(std::clamp(q, 0L, 255L));
}

// PPM header tokens are separated by whitespace; '#' starts a comment that
// runs to end of line.
struct PpmCursor {
    const std::string& buf;
    std::size_t pos = 0;

    void skip_space() {
        while (pos < buf.size()) {
            const char c = buf[pos];
            if (c == '#') {
                while (pos < buf.size() && buf[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    }

    long next_int(const char* what) {
        skip_space();
        const std::size_t start = pos;
        long value = 0;
        while (pos < buf.size() && buf[pos] >= '0' && buf[pos] <= '9') {
            value = value * 10 + (buf[pos] - '0');
            ++pos;
            if (value > 1'000'000'000L) {
                throw ParseError(std::string(what) + " is implausibly large", start);
            }
        }
        if (pos == start) {
            throw ParseError(std::string("expected ") + what, start);
        }
        return value;
    }
};

// ---- minimal PNG support (8-bit RGB, no interlace) ----

void put_be32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>(v & 0xFF));
}

std::uint32_t get_be32(const std::string& buf, std::size_t off) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off])) << 24 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 1])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 2])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 3]));
}

void append_chunk(std::string& out, const char type[4], const std::string& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t crc_start = out.size();
    out.append(type, 4);
    out += data;
    const uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(out.data() + crc_start),
                            static_cast<uInt>(out.size() - crc_start));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

const unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

unsigned char paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a);
    const int pb = std::abs(p - b);
    const int pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<unsigned char>(a);
    if (pb <= pc) return static_cast<unsigned char>(b);
    return static_cast<unsigned char>(c);
}

std::vector<unsigned char> decode_png_pixels(const std::string& buf, const std::string& path,
                                             std::size_t* height, std::size_t* width) {
    if (buf.size() < 8 || std::memcmp(buf.data(), kPngSignature, 8) != 0) {
        throw ParseError("\"" + path + "\" lacks a PNG signature", 0);
    }
    std::size_t pos = 8;
    std::size_t w = 0, h = 0;
    bool have_ihdr = false;
    std::string idat;
    while (pos + 8 <= buf.size()) {
        const std::uint32_t len = get_be32(buf, pos);
        if (pos + 12 + len > buf.size()) {
            throw ParseError("truncated PNG chunk", pos);
        }
        const std::string type = buf.substr(pos + 4, 4);
        const std::size_t data_off = pos + 8;
        if (type == "IHDR") {
            if (len != 13) throw ParseError("IHDR length must be 13", data_off);
            w = get_be32(buf, data_off);
            h = get_be32(buf, data_off + 4);
            const unsigned char bit_depth = static_cast<unsigned char>(buf[data_off + 8]);
            const unsigned char color_type = static_cast<unsigned char>(buf[data_off + 9]);
            const unsigned char interlace = static_cast<unsigned char>(buf[data_off + 12]);
            if (bit_depth != 8 || color_type != 2) {
                throw ParseError("only 8-bit RGB PNG is supported (bit depth " +
                                     std::to_string(bit_depth) + ", color type " +
                                     std::to_string(color_type) + ")",
                                 data_off + 8);
            }
            if (interlace != 0) {
                throw ParseError("interlaced PNG is not supported", data_off + 12);
            }
            have_ihdr = true;
        } else if (type == "IDAT") {
            idat += buf.substr(data_off, len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (!have_ihdr || w == 0 || h == 0) {
        throw ParseError("PNG lacks a valid IHDR", 8);
    }

    const std::size_t stride = 3 * w;
    std::vector<unsigned char> raw(h * (stride + 1));
    uLongf raw_len = static_cast<uLongf>(raw.size());
    const int rc = uncompress(raw.data(), &raw_len,
                              reinterpret_cast<const Bytef*>(idat.data()),
                              static_cast<uLong>(idat.size()));
    if (rc != Z_OK || raw_len != raw.size()) {
        throw ParseError("PNG image data does not inflate to " + std::to_string(raw.size()) +
                             " bytes",
                         8);
    }

    std::vector<unsigned char> pixels(h * stride, 0);
    for (std::size_t y = 0; y < h; ++y) {
        const unsigned char filter = raw[y * (stride + 1)];
        const unsigned char* src = &raw[y * (stride + 1) + 1];
        unsigned char* dst = &pixels[y * stride];
        const unsigned char* up = y > 0 ? &pixels[(y - 1) * stride] : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int left = i >= 3 ? dst[i - 3] : 0;
            const int above = up ? up[i] : 0;
            const int upleft = (up && i >= 3) ? up[i - 3] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += left; break;
                case 2: v += above; break;
                case 3: v += (left + above) / 2; break;
                case 4: v += paeth(left, above, upleft); break;
                default:
                    throw ParseError("unknown PNG filter " + std::to_string(filter),
                                     8 + y * (stride + 1));
            }
            dst[i] = static_cast<unsigned char>(v & 0xFF);
        }
    }
    *height = h;
    *width = w;
    return pixels;
}

std::string encode_png(const std::vector<unsigned char>& pixels, std::size_t height,
                       std::size_t width) {
    const std::size_t stride = 3 * width;
    std::string raw;
    raw.reserve(height * (stride + 1));
    for (std::size_t y = 0; y < height; ++y) {
        raw.push_back('\0'); // filter type 0
        raw.append(reinterpret_cast<const char*>(&pixels[y * stride]), stride);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::string compressed(bound, '\0');
    const int rc = compress2(reinterpret_cast<Bytef*>(compressed.data()), &bound,
                             reinterpret_cast<const Bytef*>(raw.data()),
                             static_cast<uLong>(raw.size()), Z_BEST_COMPRESSION);
    if (rc != Z_OK) {
        throw Error("PNG compression failed");
    }
    compressed.resize(bound);

    std::string ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(width));
    put_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter
    ihdr.push_back(0);  // interlace

    std::string out(reinterpret_cast<const char*>(kPngSignature), 8);
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", compressed);
    append_chunk(out, "IEND", "");
    return out;
}

Image pixels_to_image(const std::vector<unsigned char>& pixels, std::size_t height,
                      std::size_t width) {
    Image img = Tensor::zeros({height, width, 3});
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        img.data[i] = static_cast<double>(pixels[i]) / 255.0;
    }
    return img;
}

std::vector<unsigned char> image_to_pixels(const Image& image) {
    if (image.rank() != 3 || image.shape[2] != 3) {
        throw ShapeError("expected an {H, W, 3} image, got " + shape_to_string(image.shape));
    }
    std::vector<unsigned char> pixels(image.numel());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        pixels[i] = quantize(image.data[i]);
    }
    return pixels;
}

bool has_extension(const std::string& path, const char* ext) {
    const std::size_t n = std::strlen(ext);
    if (path.size() < n) return false;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::tolower(static_cast<unsigned char>(path[path.size() - n + i])) != ext[i]) {
            return false;
        }
    }
    return true;
}

} // namespace

Image read_ppm(const std::string& path) {
    const std::string buf = read_file(path);
    if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '6') {
        throw ParseError("\"" + path + "\" is not a binary PPM (P6)", 0);
    }
    PpmCursor cur{buf, 2};
    const long width = cur.next_int("width");
    const long height = cur.next_int("height");
    const std::size_t maxval_pos = cur.pos;
    const long maxval = cur.next_int("maxval");
    if (maxval != 255) {
        throw ParseError("unsupported maxval " + std::to_string(maxval) +
                             "; only maxval 255 is supported",
                         maxval_pos);
    }
    if (cur.pos >= buf.size()) {
        throw ParseError("missing whitespace after maxval", cur.pos);
    }
    ++cur.pos; // exactly one whitespace byte separates header and pixels

    const std::size_t expected = static_cast<std::size_t>(width) *
                                 static_cast<std::size_t>(height) * 3;
    if (buf.size() - cur.pos < expected) {
        throw ParseError("pixel data holds " + std::to_string(buf.size() - cur.pos) +
                             " bytes, expected " + std::to_string(expected),
                         buf.size());
    }
    Image img = Tensor::zeros({static_cast<std::size_t>(height),
                               static_cast<std::size_t>(width), 3});
    for (std::size_t i = 0; i < expected; ++i) {
        img.data[i] = static_cast<double>(static_cast<unsigned char>(buf[cur.pos + i])) / 255.0;
    }
    return img;
}

void write_ppm(const std::string& path, const Image& image) {
    const std::vector<unsigned char> pixels = image_to_pixels(image);
    std::string out = "P6\n" + std::to_string(image.shape[1]) + " " +
                      std::to_string(image.shape[0]) + "\n255\n";
    out.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
    write_file(path, out);
}

Image read_png(const std::string& path) {
    const std::string buf = read_file(path);
    std::size_t height = 0, width = 0;
    const std::vector<unsigned char> pixels = decode_png_pixels(buf, path, &height, &width);
    return pixels_to_image(pixels, height, width);
}

void write_png(const std::string& path, const Image& image) {
    const std::vector<unsigned char> pixels = image_to_pixels(image);
    write_file(path, encode_png(pixels, image.shape[0], image.shape[1]));
}

Image read_image(const std::string& path) {
    if (has_extension(path, ".png")) return read_png(path);
    if (has_extension(path, ".ppm")) return read_ppm(path);
    throw Error("unsupported image extension in \"" + path + "\" (use .ppm or .png)");
}

void write_image(const std::string& path, const Image& image) {
    if (has_extension(path, ".png")) {
        write_png(path, image);
    } else if (has_extension(path, ".ppm")) {
        write_ppm(path, image);
    } else {
        throw Error("unsupported image extension in \"" + path + "\" (use .ppm or .png)");
    }
}

RenderedMap render_heatmap(const Tensor& plq_values) {
    if (plq_values.rank() != 2) {
        throw ShapeError("PLQ values must be {H, W}, got " + shape_to_string(plq_values.shape));
    }
    RenderedMap rendered;
    rendered.height = plq_values.shape[0];
    rendered.width = plq_values.shape[1];
    rendered.pixels.resize(plq_values.numel() * 3);
    for (std::size_t i = 0; i < plq_values.numel(); ++i) {
        const double v = plq_values.data[i];
        if (!(v >= 0.0 && v < 1.0)) {
            throw std::invalid_argument("PLQ value " + format_g9(v) +
                                        " outside [0, 1) cannot be rendered");
        }
        unsigned char r, g;
        if (v <= 0.5) {
            r = 255;
            g = static_cast<unsigned char>(std::lround(510.0 * v));
        } else {
            r = static_cast<unsigned char>(std::lround(510.0 * (1.0 - v)));
            g = 255;
        }
        rendered.pixels[3 * i] = r;
        rendered.pixels[3 * i + 1] = g;
        rendered.pixels[3 * i + 2] = 0;
    }
    return rendered;
}

RenderedMap render_heatmap(const PlqMap& map) { return render_heatmap(map.values); }

void write_rendered(const std::string& path, const RenderedMap& rendered) {
    Image img = Tensor::zeros({rendered.height, rendered.width, 3});
    for (std::size_t i = 0; i < rendered.pixels.size(); ++i) {
        img.data[i] = static_cast<double>(rendered.pixels[i]) / 255.0;
    }
    write_image(path, img);
}

std::string plq_csv(const Tensor& plq_values) {
    if (plq_values.rank() != 2) {
        throw ShapeError("PLQ values must be {H, W}, got " + shape_to_string(plq_values.shape));
    }
    std::string out;
    for (std::size_t y = 0; y < plq_values.shape[0]; ++y) {
        for (std::size_t x = 0; x < plq_values.shape[1]; ++x) {
            if (x) out += ",";
            out += format_g9(plq_values.at2(y, x));
        }
        out += "\n";
    }
    return out;
}

void write_plq_csv(const std::string& path, const Tensor& plq_values) {
    write_file(path, plq_csv(plq_values));
}

Tensor read_plq_csv(const std::string& path) {
    const std::string buf = read_file(path);
    std::vector<std::vector<double>> rows;
    std::size_t pos = 0;
    while (pos < buf.size()) {
        std::size_t eol = buf.find('\n', pos);
        if (eol == std::string::npos) eol = buf.size();
        if (eol > pos) {
            std::vector<double> row;
            std::size_t p = pos;
            while (p < eol) {
                std::size_t comma = buf.find(',', p);
                if (comma == std::string::npos || comma > eol) comma = eol;
                const std::string cell = buf.substr(p, comma - p);
                char* end = nullptr;
                const double v = std::strtod(cell.c_str(), &end);
                if (end == cell.c_str() || !std::isfinite(v)) {
                    throw ParseError("invalid CSV value \"" + cell + "\"", p);
                }
                if (!(v >= 0.0 && v < 1.0)) {
                    throw ParseError("PLQ value " + cell + " outside [0, 1)", p);
                }
                row.push_back(v);
                p = comma + 1;
            }
            if (!rows.empty() && rows[0].size() != row.size()) {
                throw ParseError("ragged CSV: row " + std::to_string(rows.size()) + " has " +
                                     std::to_string(row.size()) + " values, expected " +
                                     std::to_string(rows[0].size()),
                                 pos);
            }
            rows.push_back(std::move(row));
        }
        pos = eol + 1;
    }
    if (rows.empty()) {
        throw ParseError("empty PLQ CSV", 0);
    }
    Tensor out = Tensor::zeros({rows.size(), rows[0].size()});
    for (std::size_t y = 0; y < rows.size(); ++y) {
        for (std::size_t x = 0; x < rows[y].size(); ++x) {
            out.at2(y, x) = rows[y][x];
        }
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    write_file(path, content);
}

} // namespace plq
