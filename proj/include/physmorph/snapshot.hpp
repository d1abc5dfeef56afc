#pragma once

#include <string>

#include "physmorph/mpm.hpp"

namespace physmorph {

// Binary particle snapshot, magic "PMGS", version 1, then N and per-particle
// little-endian doubles in field order x[3], v[3], C[9], F[9], mass.
// Round trips are bit exact on any platform.
void export_snapshot(const ParticleState& state, const std::string& path);
ParticleState import_snapshot(const std::string& path);

}  // namespace physmorph
