#pragma once
// Voxel-grid containers with physical spacing.
//
// All volumes are plain data: a GridMeta plus a flat payload ordered
// channel-fastest, then x-fastest (x, y, z from fastest to slowest).
// Values live as double in memory; the on-disk payload is f32/u8/u32
// (see volume_io.hpp). Volumes are immutable by convention once built:
// every operation returns a new volume.

#include "veritas/label_space.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace veritas {

struct GridMeta {
    std::array<int, 3> dims{1, 1, 1};          // voxel counts (x, y, z)
    std::array<double, 3> spacing{1.0, 1.0, 1.0}; // mm per voxel

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x;
    }
    void validate() const;
    bool operator==(const GridMeta&) const = default;
};

struct ScalarVolume {
    GridMeta meta;
    std::vector<double> data; // one value per voxel

    double at(int x, int y, int z) const { return data[meta.index(x, y, z)]; }
    double& at(int x, int y, int z) { return data[meta.index(x, y, z)]; }
    void validate() const; // size match, all finite
};

struct MaskVolume {
    GridMeta meta;
    std::vector<std::uint8_t> data; // 0/1 per voxel

    bool at(int x, int y, int z) const { return data[meta.index(x, y, z)] != 0; }
    std::size_t foreground_count() const;
    bool empty_mask() const { return foreground_count() == 0; }
    void validate() const;
};

struct ProbabilityVolume {
    GridMeta meta;
    int channels = 0;
    std::vector<double> data; // channel-fastest: data[index(x,y,z)*channels + c]

    double at(std::size_t voxel, int c) const { return data[voxel * channels + c]; }
    double& at(std::size_t voxel, int c) { return data[voxel * channels + c]; }
    // Per-voxel channel sums must be 1 within tolerance.
    void validate(double tol = 1e-6) const;
};

struct LabelSetVolume {
    GridMeta meta;
    std::vector<SubsetMask> data; // non-empty subset per voxel

    void validate() const;
};

// Hard decision from a soft map: per voxel the singleton of the
// max-probability channel; ties resolved to the lowest channel index.
LabelSetVolume argmax_labels(const ProbabilityVolume& pv);

// Divides each voxel's channels by their sum. Idempotent; throws if a
// voxel sums to zero.
ProbabilityVolume renormalize(const ProbabilityVolume& pv);

// Binary mask of voxels whose argmax equals `cls`.
MaskVolume class_mask(const ProbabilityVolume& pv, int cls);

} // namespace veritas
