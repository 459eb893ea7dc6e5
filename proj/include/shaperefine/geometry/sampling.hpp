#pragma once

#include <cstddef>

#include "shaperefine/geometry/types.hpp"
#include "shaperefine/numerics/rng.hpp"

namespace shaperefine::geometry {

/// i.i.d. points drawn uniformly by area over the mesh surface.
PointCloud uniform_area_sample(const TriangleMesh& mesh, std::size_t n, numerics::Rng& rng);

struct PoissonDiskOptions {
  double oversample = 4.0;
  double alpha = 8.0;
};

/// Blue-noise surface sample by weighted sample elimination: draw
/// oversample*n uniform candidates, then repeatedly drop the candidate with
/// the largest crowding weight until n remain. The result keeps the
/// candidates' original order.
PointCloud poisson_disk_sample(const TriangleMesh& mesh, std::size_t n, numerics::Rng& rng,
                               const PoissonDiskOptions& options = {});

}  // namespace shaperefine::geometry
