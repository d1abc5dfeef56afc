#include "physmorph/knn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "physmorph/parallel.hpp"

namespace physmorph {

namespace {

inline double dist_sq(const Vec3& a, const Vec3& b) {
    double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

// strict "a beats b" ordering; the heap built with it keeps the worst
// retained neighbor at the front
inline bool better(const SpatialIndex::Neighbor& a, const SpatialIndex::Neighbor& b) {
    if (a.dist_sq != b.dist_sq) return a.dist_sq < b.dist_sq;
    return a.index < b.index;
}

}  // namespace

SpatialIndex::SpatialIndex(const std::vector<Vec3>& points) : points_(points) {
    if (points_.empty()) {
        cell_start_.assign(2, 0);
        return;
    }
    lo_ = hi_ = points_[0];
    for (const Vec3& p : points_) {
        lo_ = {std::min(lo_.x, p.x), std::min(lo_.y, p.y), std::min(lo_.z, p.z)};
        hi_ = {std::max(hi_.x, p.x), std::max(hi_.y, p.y), std::max(hi_.z, p.z)};
    }
    Vec3 ext = hi_ - lo_;
    double vol = std::max(ext.x, 1e-9) * std::max(ext.y, 1e-9) * std::max(ext.z, 1e-9);
    // aim for ~1 point per cell, capped at 64 cells per axis
    cell_ = std::max(std::cbrt(vol / points_.size()), 1e-9);
    for (int a = 0; a < 3; ++a) {
        dims_[a] = std::clamp(int(ext[a] / cell_) + 1, 1, 64);
    }
    // recompute the cell size so the capped grid still covers the bbox
    for (int a = 0; a < 3; ++a) cell_ = std::max(cell_, ext[a] / dims_[a] + 1e-12);

    std::size_t ncells = std::size_t(dims_[0]) * dims_[1] * dims_[2];
    std::vector<int> counts(ncells, 0);
    std::vector<int> cell_id(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
        int c[3];
        cell_id[i] = cell_of(points_[i], c);
        ++counts[cell_id[i]];
    }
    cell_start_.assign(ncells + 1, 0);
    for (std::size_t c = 0; c < ncells; ++c) cell_start_[c + 1] = cell_start_[c] + counts[c];
    cell_points_.resize(points_.size());
    std::vector<int> cursor(cell_start_.begin(), cell_start_.end() - 1);
    for (std::size_t i = 0; i < points_.size(); ++i) cell_points_[cursor[cell_id[i]]++] = int(i);
}

int SpatialIndex::cell_of(const Vec3& p, int out[3]) const {
    for (int a = 0; a < 3; ++a) {
        int c = int(std::floor((p[a] - lo_[a]) / cell_));
        out[a] = std::clamp(c, 0, dims_[a] - 1);
    }
    return (out[0] * dims_[1] + out[1]) * dims_[2] + out[2];
}

void SpatialIndex::query(const Vec3& q, int k, std::vector<Neighbor>& out) const {
    if (k > int(points_.size()))
        throw std::invalid_argument("SpatialIndex::query: k exceeds point count");
    out.clear();
    if (k <= 0) return;
    out.reserve(k);

    int c0[3];
    cell_of(q, c0);
    const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});

    auto consider = [&](int idx) {
        Neighbor cand{idx, dist_sq(q, points_[idx])};
        if (int(out.size()) < k) {
            out.push_back(cand);
            std::push_heap(out.begin(), out.end(), better);
        } else if (better(cand, out.front())) {
            std::pop_heap(out.begin(), out.end(), better);
            out.back() = cand;
            std::push_heap(out.begin(), out.end(), better);
        }
    };

    for (int r = 0; r <= max_ring; ++r) {
        if (int(out.size()) == k && r >= 1) {
            // cells at Chebyshev radius r lie outside the box of radius r-1;
            // the exit distance from q to that box bounds them from below
            double exit = 1e300;
            for (int a = 0; a < 3; ++a) {
                double blo = lo_[a] + (c0[a] - (r - 1)) * cell_;
                double bhi = lo_[a] + (c0[a] + (r - 1) + 1) * cell_;
                exit = std::min(exit, std::min(q[a] - blo, bhi - q[a]));
            }
            if (exit > 0.0 && exit * exit > out.front().dist_sq) break;
        }
        for (int i = std::max(c0[0] - r, 0); i <= std::min(c0[0] + r, dims_[0] - 1); ++i)
            for (int j = std::max(c0[1] - r, 0); j <= std::min(c0[1] + r, dims_[1] - 1); ++j)
                for (int l = std::max(c0[2] - r, 0); l <= std::min(c0[2] + r, dims_[2] - 1); ++l) {
                    int cheb = std::max({std::abs(i - c0[0]), std::abs(j - c0[1]),
                                         std::abs(l - c0[2])});
                    if (cheb != r) continue;
                    int cell = (i * dims_[1] + j) * dims_[2] + l;
                    for (int s = cell_start_[cell]; s < cell_start_[cell + 1]; ++s)
                        consider(cell_points_[s]);
                }
    }
    std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.dist_sq != b.dist_sq) return a.dist_sq < b.dist_sq;
        return a.index < b.index;
    });
}

int SpatialIndex::nearest(const Vec3& q) const {
    std::vector<Neighbor> one;
    query(q, 1, one);
    return one.empty() ? -1 : one[0].index;
}

KnnResult knn(const std::vector<Vec3>& points, const std::vector<Vec3>& queries, int k,
              double eta) {
    if (k > int(points.size())) throw std::invalid_argument("knn: k exceeds point count");
    SpatialIndex index(points);
    KnnResult res;
    res.k = k;
    res.indices.resize(queries.size() * k);
    res.weights.resize(queries.size() * k);
    parallel_ranges(queries.size(), [&](std::size_t begin, std::size_t end) {
        std::vector<SpatialIndex::Neighbor> nb;
        for (std::size_t qi = begin; qi < end; ++qi) {
            index.query(queries[qi], k, nb);
            double sum = 0.0;
            for (int j = 0; j < k; ++j) {
                double w = 1.0 / (std::sqrt(nb[j].dist_sq) + eta);
                res.indices[qi * k + j] = nb[j].index;
                res.weights[qi * k + j] = w;
                sum += w;
            }
            for (int j = 0; j < k; ++j) res.weights[qi * k + j] /= sum;
        }
    });
    return res;
}

}  // namespace physmorph
