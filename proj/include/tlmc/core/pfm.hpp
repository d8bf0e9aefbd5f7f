#pragma once

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tlmc/core/error.hpp"
#include "tlmc/core/image.hpp"

namespace tlmc {

// Portable float map, colour variant only. Payload is little-endian float32
// RGB, rows stored bottom-to-top; Image keeps row 0 at the top.

inline std::string encode_pfm(const Image& img) {
    std::string header = "PF\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n-1.0\n";
    std::string out = header;
    out.resize(header.size() + std::size_t(img.width()) * img.height() * 12);
    char* p = out.data() + header.size();
    for (int y = img.height() - 1; y >= 0; --y) {
        for (int x = 0; x < img.width(); ++x) {
            const Rgb& c = img.at(x, y);
            float v[3] = {float(c.x), float(c.y), float(c.z)};
            for (float f : v) {
                std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
                for (int b = 0; b < 4; ++b) *p++ = char((bits >> (8 * b)) & 0xff);
            }
        }
    }
    return out;
}

inline Image decode_pfm(const std::string& bytes) {
    std::size_t pos = 0;
    auto token = [&](const char* what) {
        while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (start == pos) throw FormatError(std::string("pfm: missing ") + what);
        return bytes.substr(start, pos - start);
    };
    std::string magic = token("magic");
    if (magic == "Pf") throw FormatError("pfm: greyscale 'Pf' maps are not supported");
    if (magic != "PF") throw FormatError("pfm: bad magic '" + magic + "'");
    int w = 0, h = 0;
    double scale = 0;
    try {
        w = std::stoi(token("width"));
        h = std::stoi(token("height"));
        scale = std::stod(token("scale"));
    } catch (const std::logic_error&) {
        throw FormatError("pfm: malformed header");
    }
    if (w <= 0 || h <= 0) throw FormatError("pfm: non-positive dimensions");
    if (scale >= 0) throw FormatError("pfm: big-endian (non-negative scale) maps are not supported");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw FormatError("pfm: header must end with a single whitespace byte");
    ++pos;
    std::size_t expected = std::size_t(w) * h * 12;
    std::size_t actual = bytes.size() - pos;
    if (actual < expected)
        throw FormatError("pfm: truncated payload, expected " + std::to_string(expected) + " bytes, got " +
                          std::to_string(actual));
    Image img(w, h);
    const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    for (int y = h - 1; y >= 0; --y) {
        for (int x = 0; x < w; ++x) {
            float v[3];
            for (float& f : v) {
                std::uint32_t bits = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
                                     std::uint32_t(p[3]) << 24;
                f = std::bit_cast<float>(bits);
                p += 4;
            }
            img.at(x, y) = Rgb(v[0], v[1], v[2]);
        }
    }
    return img;
}

inline void write_pfm(const std::string& path, const Image& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    std::string data = encode_pfm(img);
    f.write(data.data(), std::streamsize(data.size()));
    if (!f) throw Error("failed writing '" + path + "'");
}

inline Image read_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return decode_pfm(ss.str());
}

}  // namespace tlmc
