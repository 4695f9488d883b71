#pragma once
// Exact anisotropic Euclidean distance transform on voxel grids.
//
// Three separable 1D passes of the lower-envelope (parabola) algorithm with
// the physical spacing folded into each axis. Distances are exact (not
// chamfer approximations) and returned in mm, zero inside the mask.

#include "veritas/volume.hpp"

namespace veritas {

// Throws if the mask is empty.
ScalarVolume distance_transform(const MaskVolume& mask);

// Same transform without the final square root (distance squared, mm^2).
ScalarVolume distance_transform_squared(const MaskVolume& mask);

} // namespace veritas
