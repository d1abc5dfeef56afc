#include "physmorph/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace physmorph {

void write_ppm(const std::string& path, const std::vector<double>& rgb, int width, int height) {
    if (rgb.size() != std::size_t(width) * height * 3)
        throw std::invalid_argument("write_ppm: buffer size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
    f << "P6\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> row(std::size_t(width) * 3);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width * 3; ++x) {
            double v = std::clamp(rgb[std::size_t(y) * width * 3 + x], 0.0, 1.0);
            row[x] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        f.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!f) throw std::runtime_error("write_ppm: write failed for " + path);
}

void write_pgm16(const std::string& path, const std::vector<double>& values, int width,
                 int height, double lo, double hi) {
    if (values.size() != std::size_t(width) * height)
        throw std::invalid_argument("write_pgm16: buffer size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pgm16: cannot open " + path);
    f << "P5\n" << width << " " << height << "\n65535\n";
    double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;
    std::vector<unsigned char> row(std::size_t(width) * 2);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double v = std::clamp((values[std::size_t(y) * width + x] - lo) * scale, 0.0, 65535.0);
            unsigned int q = static_cast<unsigned int>(std::lround(v));
            row[2 * x] = (q >> 8) & 0xff;  // most significant byte first
            row[2 * x + 1] = q & 0xff;
        }
        f.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!f) throw std::runtime_error("write_pgm16: write failed for " + path);
}

}  // namespace physmorph
