#pragma once

#include <string>
#include <vector>

namespace physmorph {

// Binary PPM (P6, 8-bit RGB); values clamped from [0,1].
void write_ppm(const std::string& path, const std::vector<double>& rgb, int width, int height);

// Binary PGM (P5, 16-bit big-endian); values mapped linearly from [lo, hi].
void write_pgm16(const std::string& path, const std::vector<double>& values, int width,
                 int height, double lo, double hi);

}  // namespace physmorph
