#pragma once

#include <vector>

#include "physmorph/linalg.hpp"

namespace physmorph {

// Exact k-nearest-neighbor queries through a uniform bucket grid.
// Ties are broken toward the lower point index, so results are identical
// to a brute-force scan.
class SpatialIndex {
public:
    explicit SpatialIndex(const std::vector<Vec3>& points);

    struct Neighbor {
        int index;
        double dist_sq;
    };

    // k nearest points to q, sorted by (distance, index) ascending.
    void query(const Vec3& q, int k, std::vector<Neighbor>& out) const;
    int nearest(const Vec3& q) const;

    std::size_t size() const { return points_.size(); }

private:
    std::vector<Vec3> points_;
    Vec3 lo_{}, hi_{};
    double cell_ = 1.0;
    int dims_[3] = {1, 1, 1};
    std::vector<int> cell_start_;   // CSR over cells
    std::vector<int> cell_points_;

    int cell_of(const Vec3& p, int out_coord[3]) const;
};

struct KnnResult {
    int k = 0;
    std::vector<int> indices;     // [query * k + j]
    std::vector<double> weights;  // inverse-distance, normalized per query
};

// Exact k-NN with normalized inverse-distance weights w ~ 1/(dist + eta).
KnnResult knn(const std::vector<Vec3>& points, const std::vector<Vec3>& queries, int k,
              double eta = 1e-9);

}  // namespace physmorph
