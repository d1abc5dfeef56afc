#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <ostream>
#include <string>

namespace physmorph {

// shortest round-trip decimal form; locale independent, '.' decimal point
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// little-endian scalar IO (snapshot and checkpoint formats are fixed LE)
inline void write_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f64_le(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64_le(os, bits);
}

bool read_u32_le(std::istream& is, std::uint32_t& v);
bool read_u64_le(std::istream& is, std::uint64_t& v);
bool read_f64_le(std::istream& is, double& v);

}  // namespace physmorph
