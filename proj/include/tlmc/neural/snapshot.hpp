#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "tlmc/core/error.hpp"
#include "tlmc/neural/field.hpp"

namespace tlmc {

// Little-endian container:
//   "TLMCNN01" | u32 version | u32 kind | 11 x i32 layout | 6 x f64 bounds | u64 count | count x f32
inline constexpr char kSnapshotMagic[8] = {'T', 'L', 'M', 'C', 'N', 'N', '0', '1'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

namespace detail {

class ByteWriter {
public:
    template <class U>
    void put(U v) {
        auto bits = std::bit_cast<std::array<unsigned char, sizeof(U)>>(v);
        if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
        out_.append(reinterpret_cast<const char*>(bits.data()), bits.size());
    }
    void raw(const char* p, std::size_t n) { out_.append(p, n); }
    std::string& str() { return out_; }

private:
    std::string out_;
};

class ByteReader {
public:
    explicit ByteReader(const std::string& s) : s_(s) {}
    template <class U>
    U get() {
        if (pos_ + sizeof(U) > s_.size())
            throw FormatError("snapshot truncated at byte " + std::to_string(pos_) + " of " + std::to_string(s_.size()));
        std::array<unsigned char, sizeof(U)> bits;
        std::memcpy(bits.data(), s_.data() + pos_, sizeof(U));
        if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
        pos_ += sizeof(U);
        return std::bit_cast<U>(bits);
    }
    void raw(char* p, std::size_t n) {
        if (pos_ + n > s_.size()) throw FormatError("snapshot truncated");
        std::memcpy(p, s_.data() + pos_, n);
        pos_ += n;
    }
    std::size_t remaining() const { return s_.size() - pos_; }

private:
    const std::string& s_;
    std::size_t pos_ = 0;
};

}  // namespace detail

template <class T>
std::string encode_snapshot(const NeuralField<T>& field, std::uint32_t kind) {
    detail::ByteWriter w;
    w.raw(kSnapshotMagic, 8);
    w.put<std::uint32_t>(kSnapshotVersion);
    w.put<std::uint32_t>(kind);
    const NetworkConfig& c = field.config();
    for (int v : {c.grid.levels, c.grid.features, c.grid.log2_table_size, c.grid.base_resolution, c.grid.max_resolution,
                  c.sh_bands, c.hidden_layers, c.width, c.outputs, int(c.output_activation), field.input_width()})
        w.put<std::int32_t>(v);
    const Aabb& b = field.bounds();
    for (double v : {b.lo.x, b.lo.y, b.lo.z, b.hi.x, b.hi.y, b.hi.z}) w.put<double>(v);
    w.put<std::uint64_t>(field.param_count());
    for (T p : field.params()) w.put<float>(float(p));
    return std::move(w.str());
}

struct DecodedSnapshot {
    std::uint32_t kind = 0;
    NeuralField<float> field;
};

inline DecodedSnapshot decode_snapshot(const std::string& bytes) {
    detail::ByteReader r(bytes);
    char magic[8];
    r.raw(magic, 8);
    if (std::memcmp(magic, kSnapshotMagic, 8) != 0) throw FormatError("snapshot: bad magic");
    auto version = r.get<std::uint32_t>();
    if (version != kSnapshotVersion) throw FormatError("snapshot: unsupported version " + std::to_string(version));
    DecodedSnapshot out;
    out.kind = r.get<std::uint32_t>();
    NetworkConfig c;
    c.grid.levels = r.get<std::int32_t>();
    c.grid.features = r.get<std::int32_t>();
    c.grid.log2_table_size = r.get<std::int32_t>();
    c.grid.base_resolution = r.get<std::int32_t>();
    c.grid.max_resolution = r.get<std::int32_t>();
    c.sh_bands = r.get<std::int32_t>();
    c.hidden_layers = r.get<std::int32_t>();
    c.width = r.get<std::int32_t>();
    c.outputs = r.get<std::int32_t>();
    int act = r.get<std::int32_t>();
    if (act < 0 || act > 2) throw FormatError("snapshot: bad output activation");
    c.output_activation = OutputActivation(act);
    int input_width = r.get<std::int32_t>();
    Aabb b;
    b.lo.x = r.get<double>();
    b.lo.y = r.get<double>();
    b.lo.z = r.get<double>();
    b.hi.x = r.get<double>();
    b.hi.y = r.get<double>();
    b.hi.z = r.get<double>();
    try {
        out.field = NeuralField<float>(c, b);
    } catch (const ConfigError& e) {
        throw FormatError(std::string("snapshot: invalid layout: ") + e.what());
    }
    if (out.field.input_width() != input_width) throw FormatError("snapshot: input width mismatch");
    auto count = r.get<std::uint64_t>();
    if (count != out.field.param_count())
        throw FormatError("snapshot: parameter count " + std::to_string(count) + " does not match layout (" +
                          std::to_string(out.field.param_count()) + ")");
    if (r.remaining() != count * 4)
        throw FormatError("snapshot: expected " + std::to_string(count * 4) + " payload bytes, got " +
                          std::to_string(r.remaining()));
    auto p = out.field.params();
    for (std::size_t i = 0; i < count; ++i) p[i] = r.get<float>();
    return out;
}

template <class T>
void save_snapshot(const std::string& path, const NeuralField<T>& field, std::uint32_t kind) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    std::string data = encode_snapshot(field, kind);
    f.write(data.data(), std::streamsize(data.size()));
}

inline DecodedSnapshot load_snapshot(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return decode_snapshot(ss.str());
}

}  // namespace tlmc
