#include "physmorph/snapshot.hpp"

#include <fstream>
#include <istream>
#include <stdexcept>

#include "physmorph/io_util.hpp"

namespace physmorph {

bool read_u32_le(std::istream& is, std::uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return true;
}

bool read_u64_le(std::istream& is, std::uint64_t& v) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
    v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return true;
}

bool read_f64_le(std::istream& is, double& v) {
    std::uint64_t bits;
    if (!read_u64_le(is, bits)) return false;
    std::memcpy(&v, &bits, 8);
    return true;
}

namespace {
constexpr char kMagic[4] = {'P', 'M', 'G', 'S'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void export_snapshot(const ParticleState& state, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("export_snapshot: cannot open " + path);
    os.write(kMagic, 4);
    write_u32_le(os, kVersion);
    write_u64_le(os, state.size());
    for (std::size_t p = 0; p < state.size(); ++p) {
        for (int a = 0; a < 3; ++a) write_f64_le(os, state.x[p][a]);
        for (int a = 0; a < 3; ++a) write_f64_le(os, state.v[p][a]);
        for (int a = 0; a < 9; ++a) write_f64_le(os, state.C[p].m[a]);
        for (int a = 0; a < 9; ++a) write_f64_le(os, state.F[p].m[a]);
        write_f64_le(os, state.mass[p]);
    }
    if (!os) throw std::runtime_error("export_snapshot: write failed for " + path);
}

ParticleState import_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("import_snapshot: cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("import_snapshot: bad magic in " + path);
    std::uint32_t version;
    if (!read_u32_le(is, version)) throw std::runtime_error("import_snapshot: truncated header");
    if (version != kVersion)
        throw std::runtime_error("import_snapshot: version " + std::to_string(version) +
                                 " unsupported (expected " + std::to_string(kVersion) + ")");
    std::uint64_t n;
    if (!read_u64_le(is, n)) throw std::runtime_error("import_snapshot: truncated header");

    ParticleState state;
    state.resize(n);
    for (std::uint64_t p = 0; p < n; ++p) {
        bool ok = true;
        for (int a = 0; a < 3; ++a) ok &= read_f64_le(is, state.x[p][a]);
        for (int a = 0; a < 3; ++a) ok &= read_f64_le(is, state.v[p][a]);
        for (int a = 0; a < 9; ++a) ok &= read_f64_le(is, state.C[p].m[a]);
        for (int a = 0; a < 9; ++a) ok &= read_f64_le(is, state.F[p].m[a]);
        ok &= read_f64_le(is, state.mass[p]);
        if (!ok) throw std::runtime_error("import_snapshot: truncated particle data");
    }
    return state;
}

}  // namespace physmorph
