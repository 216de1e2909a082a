#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace reco {

// Little-endian primitives for the binary cache and model formats.
// Encoding is explicit (shift-based) so the files are portable no matter
// the host byte order.

inline void write_u8(std::ostream& os, std::uint8_t v) {
    os.put(static_cast<char>(v));
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

inline void write_i32(std::ostream& os, std::int32_t v) {
    write_u32(os, static_cast<std::uint32_t>(v));
}

inline void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(os, bits);
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint8_t read_u8(std::istream& is) {
    int c = is.get();
    if (c == EOF) throw std::runtime_error("unexpected end of binary stream");
    return static_cast<std::uint8_t>(c);
}

inline std::uint32_t read_u32(std::istream& is) {
    char b[4];
    if (!is.read(b, 4)) throw std::runtime_error("unexpected end of binary stream");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

inline std::uint64_t read_u64(std::istream& is) {
    char b[8];
    if (!is.read(b, 8)) throw std::runtime_error("unexpected end of binary stream");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

inline std::int32_t read_i32(std::istream& is) {
    return static_cast<std::int32_t>(read_u32(is));
}

inline double read_f64(std::istream& is) {
    const std::uint64_t bits = read_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline std::string read_string(std::istream& is) {
    const std::uint64_t n = read_u64(is);
    std::string s(n, '\0');
    if (n && !is.read(s.data(), static_cast<std::streamsize>(n)))
        throw std::runtime_error("unexpected end of binary stream");
    return s;
}

inline void write_f64_array(std::ostream& os, std::span<const double> xs) {
    write_u64(os, xs.size());
    for (double x : xs) write_f64(os, x);
}

inline std::vector<double> read_f64_array(std::istream& is) {
    const std::uint64_t n = read_u64(is);
    std::vector<double> xs(n);
    for (auto& x : xs) x = read_f64(is);
    return xs;
}

inline void expect_magic(std::istream& is, const char* magic,
                         const char* what) {
    const std::size_t len = std::strlen(magic);
    std::string got(len, '\0');
    if (!is.read(got.data(), static_cast<std::streamsize>(len)) || got != magic)
        throw std::runtime_error(std::string("bad magic for ") + what);
}

}  // namespace reco
